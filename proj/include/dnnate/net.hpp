#pragma once

// Feedforward regression networks: a dense multilayer perceptron and the
// sparse hierarchical interaction network built from two-layer sigmoid
// blocks. Both expose a flat coefficient vector so that training, clipping,
// gradient checks and serialization share one code path.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

namespace dnnate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { sigmoid, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// Layer widths from input to output, e.g. {51, 51, 51, 51, 1}.
struct DenseTopology {
  std::vector<std::size_t> widths;
  bool operator==(const DenseTopology&) const = default;
};

// Shape of a hierarchical interaction network.
//
// A level-0 network over d inputs is one block
//   f(x) = mu_0 + sum_i mu_i * s(lambda_i0 + sum_j lambda_ij * s(theta_ij0 + sum_v theta_ijv x_v))
// with i = 1..M and j = 1..4*p_star. A level-l network is
//   h(x) = sum_k g_k(f_1k(x), ..., f_{p_star}k(x)),  k = 1..K,
// where every g_k is a block over p_star inputs and every f_jk a level-(l-1)
// network over the raw input.
//
// Flat coefficient order of one block: mu_0..mu_M, then for each i the row
// (lambda_i0, lambda_i1..), then for each (i, j) the row (theta_ij0, theta_ij1..).
// A level-l network stores, for k = 1..K, block g_k followed by f_1k..f_{p_star}k.
struct HierarchicalSpec {
  int level = 0;
  int K = 1;
  int p_star = 1;
  int M = 1;
  std::size_t input_dim = 1;
  double alpha = 1.0;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const HierarchicalSpec&) const = default;
};

// Parameter count of one level-0 block over `inputs` inputs.
std::size_t hierarchical_block_size(int M, int p_star, std::size_t inputs);

using Topology = std::variant<DenseTopology, HierarchicalSpec>;

enum class InitScheme { glorot_uniform };

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  std::size_t epochs = 800;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::glorot_uniform;

  void validate() const;
};

class NeuralNet {
 public:
  NeuralNet(Topology topology, Activation activation, std::optional<double> clip_alpha,
            std::vector<double> coefficients);

  const Topology& topology() const { return topology_; }
  Activation activation() const { return activation_; }
  std::optional<double> clip_alpha() const { return clip_alpha_; }
  bool is_dense() const { return std::holds_alternative<DenseTopology>(topology_); }

  std::size_t input_dim() const;
  std::size_t parameter_count() const { return coef_.size(); }

  std::span<const double> coefficients() const { return coef_; }
  std::span<double> coefficients() { return coef_; }

  // Clamp every coefficient to [-clip_alpha, clip_alpha]; no-op without a clip.
  void project();

  bool operator==(const NeuralNet&) const = default;

 private:
  Topology topology_;
  Activation activation_;
  std::optional<double> clip_alpha_;
  // Aligned so Eigen kernels see the same layout on every run.
  std::vector<double, Eigen::aligned_allocator<double>> coef_;
};

// Parameter count implied by a topology.
std::size_t parameter_count(const Topology& topology);

NeuralNet build_dense(std::span<const std::size_t> widths, Activation activation,
                      std::uint64_t seed, std::optional<double> clip_alpha = std::nullopt);

// Coefficients are drawn fan-scaled and then limited to [-alpha, alpha]; alpha
// also becomes the training clip.
NeuralNet build_hierarchical(const HierarchicalSpec& spec, std::uint64_t seed,
                             Activation activation = Activation::sigmoid);

double forward(const NeuralNet& net, std::span<const double> x);

// Network output for every row of `inputs` (n x input_dim).
Vector forward_batch(const NeuralNet& net, const Matrix& inputs);

// Gradient of (forward(net, x) - target)^2 with respect to the flat coefficients.
std::vector<double> gradient(const NeuralNet& net, std::span<const double> x, double target);

// Mean squared error over a batch and its gradient, written into `grad`.
// Columns of `inputs_t` are samples.
double batch_loss_and_gradient(const NeuralNet& net, const Matrix& inputs_t,
                               std::span<const double> targets, std::vector<double>& grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const TrainConfig& cfg);

// Seeded-shuffled mini-batch Adam on mean squared error. `inputs` is n x input_dim.
NeuralNet train_mse(NeuralNet net, const Matrix& inputs, std::span<const double> targets,
                    const TrainConfig& cfg);

// value clamped to [-bound, bound].
double trunc(double value, double bound);

// Level-0 block g_k of a hierarchical net with level >= 1, as a standalone net.
NeuralNet hierarchical_block(const NeuralNet& net, int k);
// Sub-network f_jk (level - 1) of a hierarchical net with level >= 1.
NeuralNet hierarchical_subnet(const NeuralNet& net, int k, int j);

// Versioned JSON document {format, version, topology, activation, clip_alpha, layers}.
nlohmann::json to_json(const NeuralNet& net);
NeuralNet net_from_json(const nlohmann::json& doc);

}  // namespace dnnate
