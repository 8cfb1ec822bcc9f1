#include "dnnate/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnnate/error.hpp"
#include "dnnate/rng.hpp"

namespace dnnate {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5117;

constexpr int kFormatVersion = 1;

double activate(Activation a, double z) {
  if (a == Activation::sigmoid) return 1.0 / (1.0 + std::exp(-z));
  return z > 0.0 ? z : 0.0;
}

// Derivative expressed through the activation value.
double activation_slope(Activation a, double out) {
  if (a == Activation::sigmoid) return out * (1.0 - out);
  return out > 0.0 ? 1.0 : 0.0;
}

template <typename Derived>
void activate_inplace(Activation a, Eigen::MatrixBase<Derived>& m) {
  if (a == Activation::sigmoid) {
    m.derived().array() = (1.0 + (-m.derived().array()).exp()).inverse();
  } else {
    m.derived().array() = m.derived().array().max(0.0);
  }
}

template <typename Derived>
void scale_by_slope(Activation a, const Matrix& out, Eigen::MatrixBase<Derived>& delta) {
  if (a == Activation::sigmoid) {
    delta.derived().array() *= out.array() * (1.0 - out.array());
  } else {
    delta.derived().array() *= (out.array() > 0.0).cast<double>();
  }
}

// ---------------------------------------------------------------- dense

std::size_t dense_count(const DenseTopology& t) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < t.widths.size(); ++l) n += (t.widths[l] + 1) * t.widths[l + 1];
  return n;
}

void validate_dense(const DenseTopology& t) {
  if (t.widths.size() < 2) throw InvalidInput("dense topology needs at least two layer widths");
  if (t.widths.back() != 1) throw InvalidInput("dense topology must end in a single output");
  for (auto w : t.widths)
    if (w == 0) throw InvalidInput("dense layer widths must be positive");
}

struct DenseWorkspace {
  std::vector<Matrix> act;
  Matrix delta;
  Matrix delta_prev;
  RowMatrix gw;
  Vector gb;
};

// Forward pass over the columns of `x`; act[0] is a copy of the input.
void dense_forward(const NeuralNet& net, const Matrix& x, DenseWorkspace& ws) {
  const auto& widths = std::get<DenseTopology>(net.topology()).widths;
  const std::size_t layers = widths.size() - 1;
  ws.act.resize(layers + 1);
  ws.act[0] = x;
  const double* p = net.coefficients().data();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    Eigen::Map<const RowMatrix> w(p, out, in);
    Eigen::Map<const Vector> b(p + out * in, out);
    p += (in + 1) * out;
    ws.act[l + 1].noalias() = w * ws.act[l];
    ws.act[l + 1].colwise() += b;
    if (l + 1 < layers) activate_inplace(net.activation(), ws.act[l + 1]);
  }
}

double dense_loss_and_gradient(const NeuralNet& net, const Matrix& x,
                               std::span<const double> targets, std::vector<double>& grad,
                               DenseWorkspace& ws) {
  const auto& widths = std::get<DenseTopology>(net.topology()).widths;
  const std::size_t layers = widths.size() - 1;
  const auto batch = x.cols();
  dense_forward(net, x, ws);

  Eigen::Map<const Eigen::RowVectorXd> y(targets.data(), batch);
  ws.delta = ws.act[layers].row(0) - y;
  const double loss = ws.delta.squaredNorm() / static_cast<double>(batch);
  ws.delta *= 2.0 / static_cast<double>(batch);

  grad.resize(net.parameter_count());
  std::size_t offset = net.parameter_count();
  const double* coef = net.coefficients().data();
  for (std::size_t l = layers; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    offset -= static_cast<std::size_t>((in + 1) * out);
    Eigen::Map<RowMatrix> gw(grad.data() + offset, out, in);
    Eigen::Map<Vector> gb(grad.data() + offset + out * in, out);
    // Reduce into aligned buffers; a Map over `grad` would change Eigen's summation order with its address.
    ws.gw.noalias() = ws.delta * ws.act[l].transpose();
    ws.gb = ws.delta.rowwise().sum();
    gw = ws.gw;
    gb = ws.gb;
    if (l > 0) {
      Eigen::Map<const RowMatrix> w(coef + offset, out, in);
      ws.delta_prev.noalias() = w.transpose() * ws.delta;
      scale_by_slope(net.activation(), ws.act[l], ws.delta_prev);
      std::swap(ws.delta, ws.delta_prev);
    }
  }
  return loss;
}

// ---------------------------------------------------------- hierarchical

std::size_t hier_count(const HierarchicalSpec& s, int level) {
  if (level == 0) return hierarchical_block_size(s.M, s.p_star, s.input_dim);
  const auto inputs = static_cast<std::size_t>(s.p_star);
  return static_cast<std::size_t>(s.K) *
         (hierarchical_block_size(s.M, s.p_star, inputs) +
          static_cast<std::size_t>(s.p_star) * hier_count(s, level - 1));
}

struct BlockShape {
  std::size_t M;
  std::size_t inner;  // 4 * p_star
  std::size_t inputs;
};

BlockShape block_shape(const HierarchicalSpec& s, std::size_t inputs) {
  return {static_cast<std::size_t>(s.M), 4 * static_cast<std::size_t>(s.p_star), inputs};
}

double block_forward(const double* p, const BlockShape& b, const double* x, Activation act,
                     std::vector<double>* inner_out, std::vector<double>* outer_out) {
  const double* mu = p;
  const double* lambda = mu + b.M + 1;
  const double* theta = lambda + b.M * (b.inner + 1);
  std::vector<double> inner(b.inner);
  double out = mu[0];
  if (inner_out) inner_out->resize(b.M * b.inner);
  if (outer_out) outer_out->resize(b.M);
  for (std::size_t i = 0; i < b.M; ++i) {
    const double* lam = lambda + i * (b.inner + 1);
    double z = lam[0];
    for (std::size_t j = 0; j < b.inner; ++j) {
      const double* th = theta + (i * b.inner + j) * (b.inputs + 1);
      double u = th[0];
      for (std::size_t v = 0; v < b.inputs; ++v) u += th[v + 1] * x[v];
      inner[j] = activate(act, u);
      z += lam[j + 1] * inner[j];
      if (inner_out) (*inner_out)[i * b.inner + j] = inner[j];
    }
    const double a = activate(act, z);
    if (outer_out) (*outer_out)[i] = a;
    out += mu[i + 1] * a;
  }
  return out;
}

// Accumulates d(out)/d(coef) * dout into g and, when dx is given, d(out)/dx * dout into dx.
void block_backward(const double* p, double* g, const BlockShape& b, const double* x,
                    Activation act, double dout, double* dx) {
  std::vector<double> inner, outer;
  block_forward(p, b, x, act, &inner, &outer);
  const double* mu = p;
  const double* lambda = mu + b.M + 1;
  const double* theta = lambda + b.M * (b.inner + 1);
  double* gmu = g;
  double* glambda = gmu + b.M + 1;
  double* gtheta = glambda + b.M * (b.inner + 1);

  gmu[0] += dout;
  for (std::size_t i = 0; i < b.M; ++i) {
    gmu[i + 1] += dout * outer[i];
    const double dz = dout * mu[i + 1] * activation_slope(act, outer[i]);
    const double* lam = lambda + i * (b.inner + 1);
    double* glam = glambda + i * (b.inner + 1);
    glam[0] += dz;
    for (std::size_t j = 0; j < b.inner; ++j) {
      const double a = inner[i * b.inner + j];
      glam[j + 1] += dz * a;
      const double du = dz * lam[j + 1] * activation_slope(act, a);
      const std::size_t row = (i * b.inner + j) * (b.inputs + 1);
      gtheta[row] += du;
      for (std::size_t v = 0; v < b.inputs; ++v) {
        gtheta[row + v + 1] += du * x[v];
        if (dx) dx[v] += du * theta[row + v + 1];
      }
    }
  }
}

double hier_forward(const HierarchicalSpec& s, int level, const double* p, const double* x,
                    Activation act) {
  if (level == 0) return block_forward(p, block_shape(s, s.input_dim), x, act, nullptr, nullptr);
  const auto ps = static_cast<std::size_t>(s.p_star);
  const BlockShape top = block_shape(s, ps);
  const std::size_t top_size = hierarchical_block_size(s.M, s.p_star, ps);
  const std::size_t sub_size = hier_count(s, level - 1);
  std::vector<double> sub(ps);
  double out = 0.0;
  for (int k = 0; k < s.K; ++k) {
    const double* g = p;
    p += top_size;
    for (std::size_t j = 0; j < ps; ++j, p += sub_size) sub[j] = hier_forward(s, level - 1, p, x, act);
    out += block_forward(g, top, sub.data(), act, nullptr, nullptr);
  }
  return out;
}

void hier_backward(const HierarchicalSpec& s, int level, const double* p, double* g,
                   const double* x, Activation act, double dout) {
  if (level == 0) {
    block_backward(p, g, block_shape(s, s.input_dim), x, act, dout, nullptr);
    return;
  }
  const auto ps = static_cast<std::size_t>(s.p_star);
  const BlockShape top = block_shape(s, ps);
  const std::size_t top_size = hierarchical_block_size(s.M, s.p_star, ps);
  const std::size_t sub_size = hier_count(s, level - 1);
  std::vector<double> sub(ps), dsub(ps);
  for (int k = 0; k < s.K; ++k) {
    const double* block = p;
    double* gblock = g;
    const double* subs = p + top_size;
    double* gsubs = g + top_size;
    for (std::size_t j = 0; j < ps; ++j)
      sub[j] = hier_forward(s, level - 1, subs + j * sub_size, x, act);
    std::fill(dsub.begin(), dsub.end(), 0.0);
    block_backward(block, gblock, top, sub.data(), act, dout, dsub.data());
    for (std::size_t j = 0; j < ps; ++j)
      hier_backward(s, level - 1, subs + j * sub_size, gsubs + j * sub_size, x, act, dsub[j]);
    p += top_size + ps * sub_size;
    g += top_size + ps * sub_size;
  }
}

double hier_loss_and_gradient(const NeuralNet& net, const Matrix& x,
                              std::span<const double> targets, std::vector<double>& grad) {
  const auto& s = std::get<HierarchicalSpec>(net.topology());
  grad.assign(net.parameter_count(), 0.0);
  const auto batch = static_cast<double>(x.cols());
  double loss = 0.0;
  Vector col;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    col = x.col(c);
    const double r =
        hier_forward(s, s.level, net.coefficients().data(), col.data(), net.activation()) -
        targets[static_cast<std::size_t>(c)];
    loss += r * r;
    hier_backward(s, s.level, net.coefficients().data(), grad.data(), col.data(),
                  net.activation(), 2.0 * r / batch);
  }
  return loss / batch;
}

// ------------------------------------------------------------ layouts

// Flat coefficient indices of one logical layer, for serialization.
struct LayerIndex {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> weights;  // row-major
  std::vector<std::size_t> biases;
};

void block_layout(std::size_t offset, const BlockShape& b, std::vector<LayerIndex>& out) {
  const std::size_t lambda = offset + b.M + 1;
  const std::size_t theta = lambda + b.M * (b.inner + 1);
  LayerIndex inner{b.M * b.inner, b.inputs, {}, {}};
  for (std::size_t r = 0; r < inner.rows; ++r) {
    const std::size_t row = theta + r * (b.inputs + 1);
    inner.biases.push_back(row);
    for (std::size_t v = 0; v < b.inputs; ++v) inner.weights.push_back(row + 1 + v);
  }
  LayerIndex outer{b.M, b.inner, {}, {}};
  for (std::size_t i = 0; i < b.M; ++i) {
    const std::size_t row = lambda + i * (b.inner + 1);
    outer.biases.push_back(row);
    for (std::size_t j = 0; j < b.inner; ++j) outer.weights.push_back(row + 1 + j);
  }
  LayerIndex head{1, b.M, {}, {offset}};
  for (std::size_t i = 0; i < b.M; ++i) head.weights.push_back(offset + 1 + i);
  out.push_back(std::move(inner));
  out.push_back(std::move(outer));
  out.push_back(std::move(head));
}

std::size_t hier_layout(const HierarchicalSpec& s, int level, std::size_t offset,
                        std::vector<LayerIndex>& out) {
  if (level == 0) {
    block_layout(offset, block_shape(s, s.input_dim), out);
    return offset + hier_count(s, 0);
  }
  const auto ps = static_cast<std::size_t>(s.p_star);
  for (int k = 0; k < s.K; ++k) {
    block_layout(offset, block_shape(s, ps), out);
    offset += hierarchical_block_size(s.M, s.p_star, ps);
    for (std::size_t j = 0; j < ps; ++j) offset = hier_layout(s, level - 1, offset, out);
  }
  return offset;
}

std::vector<LayerIndex> layout(const Topology& topology) {
  std::vector<LayerIndex> out;
  if (const auto* d = std::get_if<DenseTopology>(&topology)) {
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < d->widths.size(); ++l) {
      LayerIndex li{d->widths[l + 1], d->widths[l], {}, {}};
      for (std::size_t k = 0; k < li.rows * li.cols; ++k) li.weights.push_back(offset + k);
      offset += li.rows * li.cols;
      for (std::size_t k = 0; k < li.rows; ++k) li.biases.push_back(offset + k);
      offset += li.rows;
      out.push_back(std::move(li));
    }
  } else {
    hier_layout(std::get<HierarchicalSpec>(topology), std::get<HierarchicalSpec>(topology).level,
                0, out);
  }
  return out;
}

void check_input(const NeuralNet& net, std::size_t n) {
  if (n != net.input_dim())
    throw InvalidInput("input has length " + std::to_string(n) + ", network expects " +
                       std::to_string(net.input_dim()));
}

}  // namespace

// -------------------------------------------------------------- public

std::string_view to_string(Activation a) { return a == Activation::sigmoid ? "sigmoid" : "relu"; }

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

std::size_t hierarchical_block_size(int M, int p_star, std::size_t inputs) {
  const auto m = static_cast<std::size_t>(M);
  const auto q = 4 * static_cast<std::size_t>(p_star);
  return (m + 1) + m * (q + 1) + m * q * (inputs + 1);
}

void HierarchicalSpec::validate() const {
  if (level < 0) throw InvalidInput("hierarchical level must be nonnegative");
  if (K < 1) throw InvalidInput("hierarchical K must be at least 1");
  if (p_star < 1) throw InvalidInput("hierarchical p_star must be at least 1");
  if (M < 1) throw InvalidInput("hierarchical M must be at least 1");
  if (input_dim < 1) throw InvalidInput("hierarchical input dimension must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw InvalidInput("hierarchical alpha must be positive");
}

std::size_t HierarchicalSpec::parameter_count() const {
  validate();
  return hier_count(*this, level);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (batch_size == 0) throw InvalidInput("batch size must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw InvalidInput("adam beta1 must lie in (0,1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw InvalidInput("adam beta2 must lie in (0,1)");
  if (!(adam_epsilon > 0.0)) throw InvalidInput("adam epsilon must be positive");
}

std::size_t parameter_count(const Topology& topology) {
  if (const auto* d = std::get_if<DenseTopology>(&topology)) {
    validate_dense(*d);
    return dense_count(*d);
  }
  return std::get<HierarchicalSpec>(topology).parameter_count();
}

NeuralNet::NeuralNet(Topology topology, Activation activation, std::optional<double> clip_alpha,
                     std::vector<double> coefficients)
    : topology_(std::move(topology)),
      activation_(activation),
      clip_alpha_(clip_alpha),
      coef_(coefficients.begin(), coefficients.end()) {
  if (coef_.size() != dnnate::parameter_count(topology_))
    throw InvalidInput("coefficient count " + std::to_string(coef_.size()) +
                       " does not match topology (" +
                       std::to_string(dnnate::parameter_count(topology_)) + ")");
  if (clip_alpha_ && !(*clip_alpha_ > 0.0)) throw InvalidInput("clip alpha must be positive");
}

std::size_t NeuralNet::input_dim() const {
  if (const auto* d = std::get_if<DenseTopology>(&topology_)) return d->widths.front();
  return std::get<HierarchicalSpec>(topology_).input_dim;
}

void NeuralNet::project() {
  if (!clip_alpha_) return;
  const double a = *clip_alpha_;
  for (auto& c : coef_) c = std::clamp(c, -a, a);
}

NeuralNet build_dense(std::span<const std::size_t> widths, Activation activation,
                      std::uint64_t seed, std::optional<double> clip_alpha) {
  DenseTopology topo{std::vector<std::size_t>(widths.begin(), widths.end())};
  validate_dense(topo);
  Rng rng(derive_seed(seed, kInitStream));
  std::vector<double> coef;
  coef.reserve(dense_count(topo));
  for (std::size_t l = 0; l + 1 < topo.widths.size(); ++l) {
    const std::size_t in = topo.widths[l], out = topo.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t k = 0; k < in * out; ++k) coef.push_back(rng.uniform(-limit, limit));
    coef.insert(coef.end(), out, 0.0);
  }
  NeuralNet net(std::move(topo), activation, clip_alpha, std::move(coef));
  net.project();
  return net;
}

NeuralNet build_hierarchical(const HierarchicalSpec& spec, std::uint64_t seed,
                             Activation activation) {
  spec.validate();
  Rng rng(derive_seed(seed, kInitStream));
  std::vector<double> coef(hier_count(spec, spec.level), 0.0);
  // Weights per logical layer are fan-scaled; biases start at zero.
  for (const auto& layer : layout(spec)) {
    const double limit =
        std::min(spec.alpha, std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols)));
    for (auto idx : layer.weights) coef[idx] = rng.uniform(-limit, limit);
  }
  return NeuralNet(spec, activation, spec.alpha, std::move(coef));
}

double forward(const NeuralNet& net, std::span<const double> x) {
  check_input(net, x.size());
  if (net.is_dense()) {
    DenseWorkspace ws;
    const Matrix col = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    dense_forward(net, col, ws);
    return ws.act.back()(0, 0);
  }
  const auto& s = std::get<HierarchicalSpec>(net.topology());
  return hier_forward(s, s.level, net.coefficients().data(), x.data(), net.activation());
}

Vector forward_batch(const NeuralNet& net, const Matrix& inputs) {
  check_input(net, static_cast<std::size_t>(inputs.cols()));
  if (net.is_dense()) {
    DenseWorkspace ws;
    dense_forward(net, inputs.transpose(), ws);
    return ws.act.back().row(0).transpose();
  }
  Vector out(inputs.rows());
  Vector row;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    row = inputs.row(i).transpose();
    out[i] = forward(net, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

double batch_loss_and_gradient(const NeuralNet& net, const Matrix& inputs_t,
                               std::span<const double> targets, std::vector<double>& grad) {
  check_input(net, static_cast<std::size_t>(inputs_t.rows()));
  if (static_cast<std::size_t>(inputs_t.cols()) != targets.size() || targets.empty())
    throw InvalidInput("batch inputs and targets disagree in size");
  if (net.is_dense()) {
    DenseWorkspace ws;
    return dense_loss_and_gradient(net, inputs_t, targets, grad, ws);
  }
  return hier_loss_and_gradient(net, inputs_t, targets, grad);
}

std::vector<double> gradient(const NeuralNet& net, std::span<const double> x, double target) {
  check_input(net, x.size());
  const Matrix col = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  std::vector<double> grad;
  batch_loss_and_gradient(net, col, std::span<const double>(&target, 1), grad);
  return grad;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grad.size()) throw InvalidInput("gradient and parameter sizes differ");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
  }
}

NeuralNet train_mse(NeuralNet net, const Matrix& inputs, std::span<const double> targets,
                    const TrainConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (n == 0) throw InvalidInput("training set is empty");
  if (targets.size() != n)
    throw InvalidInput("training inputs have " + std::to_string(n) + " rows but " +
                       std::to_string(targets.size()) + " targets");
  check_input(net, static_cast<std::size_t>(inputs.cols()));
  if (cfg.epochs == 0) return net;

  const Matrix xt = inputs.transpose();
  const auto d = xt.rows();
  Rng rng(derive_seed(cfg.seed, kShuffleStream));
  AdamState state;
  std::vector<double> grad;
  std::vector<double> yb;
  Matrix xb;
  DenseWorkspace ws;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t size = std::min(cfg.batch_size, n - start);
      xb.resize(d, static_cast<Eigen::Index>(size));
      yb.resize(size);
      for (std::size_t c = 0; c < size; ++c) {
        xb.col(static_cast<Eigen::Index>(c)) = xt.col(static_cast<Eigen::Index>(order[start + c]));
        yb[c] = targets[order[start + c]];
      }
      const double loss = net.is_dense() ? dense_loss_and_gradient(net, xb, yb, grad, ws)
                                         : hier_loss_and_gradient(net, xb, yb, grad);
      if (!std::isfinite(loss))
        throw TrainingDiverged(epoch, "training diverged: non-finite loss at epoch " +
                                          std::to_string(epoch));
      adam_step(net.coefficients(), grad, state, cfg);
      net.project();
    }
  }
  return net;
}

double trunc(double value, double bound) {
  if (std::abs(value) <= bound) return value;
  return value > 0.0 ? bound : -bound;
}

namespace {

const HierarchicalSpec& upper_spec(const NeuralNet& net, int k) {
  const auto* s = std::get_if<HierarchicalSpec>(&net.topology());
  if (!s || s->level < 1) throw InvalidInput("network is not a hierarchical net of level >= 1");
  if (k < 0 || k >= s->K) throw InvalidInput("block index out of range");
  return *s;
}

NeuralNet slice(const NeuralNet& net, HierarchicalSpec spec, std::size_t offset) {
  const std::size_t count = hier_count(spec, spec.level);
  auto c = net.coefficients().subspan(offset, count);
  return NeuralNet(spec, net.activation(), net.clip_alpha(),
                   std::vector<double>(c.begin(), c.end()));
}

}  // namespace

NeuralNet hierarchical_block(const NeuralNet& net, int k) {
  const auto& s = upper_spec(net, k);
  const auto ps = static_cast<std::size_t>(s.p_star);
  const std::size_t group = hierarchical_block_size(s.M, s.p_star, ps) + ps * hier_count(s, s.level - 1);
  HierarchicalSpec block = s;
  block.level = 0;
  block.input_dim = ps;
  return slice(net, block, static_cast<std::size_t>(k) * group);
}

NeuralNet hierarchical_subnet(const NeuralNet& net, int k, int j) {
  const auto& s = upper_spec(net, k);
  if (j < 0 || j >= s.p_star) throw InvalidInput("sub-network index out of range");
  const auto ps = static_cast<std::size_t>(s.p_star);
  const std::size_t top = hierarchical_block_size(s.M, s.p_star, ps);
  const std::size_t sub = hier_count(s, s.level - 1);
  HierarchicalSpec child = s;
  child.level = s.level - 1;
  return slice(net, child,
               static_cast<std::size_t>(k) * (top + ps * sub) + top + static_cast<std::size_t>(j) * sub);
}

// --------------------------------------------------------------- json

nlohmann::json to_json(const NeuralNet& net) {
  nlohmann::json topo;
  if (const auto* d = std::get_if<DenseTopology>(&net.topology())) {
    topo = {{"kind", "dense"}, {"widths", d->widths}};
  } else {
    const auto& s = std::get<HierarchicalSpec>(net.topology());
    topo = {{"kind", "hierarchical"}, {"level", s.level},     {"K", s.K},
            {"p_star", s.p_star},     {"M", s.M},             {"input_dim", s.input_dim},
            {"alpha", s.alpha}};
  }
  const auto coef = net.coefficients();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& li : layout(net.topology())) {
    nlohmann::json weights = nlohmann::json::array();
    for (std::size_t r = 0; r < li.rows; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < li.cols; ++c) row.push_back(coef[li.weights[r * li.cols + c]]);
      weights.push_back(std::move(row));
    }
    nlohmann::json biases = nlohmann::json::array();
    for (auto idx : li.biases) biases.push_back(coef[idx]);
    layers.push_back({{"weights", std::move(weights)}, {"biases", std::move(biases)}});
  }
  nlohmann::json doc;
  doc["format"] = "dnnate-net";
  doc["version"] = kFormatVersion;
  doc["topology"] = std::move(topo);
  doc["activation"] = std::string(to_string(net.activation()));
  doc["clip_alpha"] = net.clip_alpha() ? nlohmann::json(*net.clip_alpha()) : nlohmann::json();
  doc["layers"] = std::move(layers);
  return doc;
}

NeuralNet net_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "dnnate-net") throw InvalidInput("not a dnnate network document");
    if (doc.at("version").get<int>() != kFormatVersion)
      throw InvalidInput("unsupported network document version");
    const auto& t = doc.at("topology");
    Topology topo;
    if (t.at("kind") == "dense") {
      topo = DenseTopology{t.at("widths").get<std::vector<std::size_t>>()};
    } else if (t.at("kind") == "hierarchical") {
      HierarchicalSpec s;
      s.level = t.at("level").get<int>();
      s.K = t.at("K").get<int>();
      s.p_star = t.at("p_star").get<int>();
      s.M = t.at("M").get<int>();
      s.input_dim = t.at("input_dim").get<std::size_t>();
      s.alpha = t.at("alpha").get<double>();
      topo = s;
    } else {
      throw InvalidInput("unknown topology kind");
    }
    std::vector<double> coef(parameter_count(topo), 0.0);
    const auto lay = layout(topo);
    const auto& layers = doc.at("layers");
    if (layers.size() != lay.size()) throw InvalidInput("layer count does not match topology");
    for (std::size_t l = 0; l < lay.size(); ++l) {
      const auto& w = layers[l].at("weights");
      const auto& b = layers[l].at("biases");
      if (w.size() != lay[l].rows || b.size() != lay[l].biases.size())
        throw InvalidInput("layer " + std::to_string(l) + " has the wrong shape");
      for (std::size_t r = 0; r < lay[l].rows; ++r) {
        if (w[r].size() != lay[l].cols)
          throw InvalidInput("layer " + std::to_string(l) + " has the wrong shape");
        for (std::size_t c = 0; c < lay[l].cols; ++c)
          coef[lay[l].weights[r * lay[l].cols + c]] = w[r][c].get<double>();
      }
      for (std::size_t r = 0; r < b.size(); ++r) coef[lay[l].biases[r]] = b[r].get<double>();
    }
    std::optional<double> clip;
    if (!doc.at("clip_alpha").is_null()) clip = doc.at("clip_alpha").get<double>();
    return NeuralNet(std::move(topo), parse_activation(doc.at("activation").get<std::string>()),
                     clip, std::move(coef));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed network document: ") + e.what());
  }
}

}  // namespace dnnate
