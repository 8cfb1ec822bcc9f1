#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dnnate {

// Covariates are stored row-major so that one observation is a contiguous span.
using CovariateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Observational sample: covariates x (n x p), binary treatment t, outcome y.
struct Dataset {
  CovariateMatrix x;
  std::vector<int> t;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }

  std::span<const double> row(std::size_t i) const {
    return {x.data() + static_cast<Eigen::Index>(i) * x.cols(), dim()};
  }

  std::size_t treated_count() const;

  // Throws InvalidInput unless n >= 1, shapes agree, t is binary and all values are finite.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;
};

// Disjoint learning / inference index sets into one Dataset.
struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> inference;

  // |train| / |inference|.
  double ratio() const;

  // Throws InvalidInput unless both sides are nonempty, in range, free of
  // repeats and (unless allow_overlap) disjoint.
  void validate(std::size_t n, bool allow_overlap = false) const;

  bool overlaps() const;
};

}  // namespace dnnate
