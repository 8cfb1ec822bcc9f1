#include "dnnate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "dnnate/error.hpp"

namespace dnnate {

std::size_t Dataset::treated_count() const {
  return static_cast<std::size_t>(std::count(t.begin(), t.end(), 1));
}

void Dataset::validate() const {
  const std::size_t n = y.size();
  if (n == 0) throw InvalidInput("dataset is empty");
  if (t.size() != n || static_cast<std::size_t>(x.rows()) != n)
    throw InvalidInput("dataset columns disagree in length");
  if (x.cols() == 0) throw InvalidInput("dataset has no covariates");
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] != 0 && t[i] != 1)
      throw InvalidInput("treatment at row " + std::to_string(i) + " is not 0/1");
    if (!std::isfinite(y[i])) throw InvalidInput("non-finite outcome at row " + std::to_string(i));
  }
  if (!x.allFinite()) throw InvalidInput("dataset has non-finite covariates");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.t.reserve(rows.size());
  out.y.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= size()) throw InvalidInput("row index out of range");
    out.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    out.t.push_back(t[rows[k]]);
    out.y.push_back(y[rows[k]]);
  }
  return out;
}

double SplitPlan::ratio() const {
  if (inference.empty()) throw InvalidInput("split plan has an empty inference set");
  return static_cast<double>(train.size()) / static_cast<double>(inference.size());
}

void SplitPlan::validate(std::size_t n, bool allow_overlap) const {
  if (train.empty() || inference.empty())
    throw InvalidInput("split plan needs nonempty learning and inference sets");
  // bit 0: in train, bit 1: in inference
  std::vector<unsigned char> seen(n, 0);
  for (auto idx : train) {
    if (idx >= n) throw InvalidInput("split plan index out of range");
    if (seen[idx] & 1u) throw InvalidInput("split plan repeats a learning index");
    seen[idx] |= 1u;
  }
  for (auto idx : inference) {
    if (idx >= n) throw InvalidInput("split plan index out of range");
    if (seen[idx] & 2u) throw InvalidInput("split plan repeats an inference index");
    if ((seen[idx] & 1u) && !allow_overlap)
      throw InvalidInput("learning and inference sets overlap");
    seen[idx] |= 2u;
  }
}

bool SplitPlan::overlaps() const {
  std::vector<std::size_t> a(train), b(inference);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return !common.empty();
}

}  // namespace dnnate
