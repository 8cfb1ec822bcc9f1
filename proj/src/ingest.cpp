#include "dnnate/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>

#include "dnnate/error.hpp"
#include "dnnate/format.hpp"
#include "dnnate/rng.hpp"
#include "dnnate/stats.hpp"

namespace dnnate::ingest {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::string row_list(const std::vector<std::size_t>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size() && i < 10; ++i) {
    if (i) out += ", ";
    out += std::to_string(rows[i]);
  }
  if (rows.size() > 10) out += ", ... (" + std::to_string(rows.size()) + " rows)";
  return out;
}

void standardize_columns(CovariateMatrix& x, Standardize mode,
                         const std::vector<std::string>& names) {
  if (mode == Standardize::none) return;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto col = x.col(j);
    if (mode == Standardize::zscore) {
      const double m = col.mean();
      const double n = static_cast<double>(col.size());
      const double sd = n > 1 ? std::sqrt((col.array() - m).square().sum() / (n - 1.0)) : 0.0;
      if (!(sd > 0.0))
        throw ValidationError(0, "covariate '" + names[static_cast<std::size_t>(j)] +
                                     "' has zero variance and cannot be z-scored");
      col = (col.array() - m) / sd;
    } else {
      const double lo = col.minCoeff(), hi = col.maxCoeff();
      if (hi > lo) {
        col = (col.array() - lo) / (hi - lo);
      } else {
        col.setZero();
      }
    }
  }
}

}  // namespace

std::string_view to_string(Standardize s) {
  switch (s) {
    case Standardize::none: return "none";
    case Standardize::zscore: return "zscore";
    case Standardize::minmax: return "minmax";
  }
  return "none";
}

Standardize parse_standardize(std::string_view name) {
  if (name == "none") return Standardize::none;
  if (name == "zscore") return Standardize::zscore;
  if (name == "minmax") return Standardize::minmax;
  throw InvalidInput("unknown standardization '" + std::string(name) + "'");
}

void CsvSchema::validate() const {
  if (covariate_columns.empty()) throw InvalidInput("schema lists no covariate columns");
  std::set<std::string> names{outcome_column, treatment_column};
  if (names.size() != 2) throw InvalidInput("outcome and treatment columns must differ");
  for (const auto& c : covariate_columns) {
    if (c.empty()) throw InvalidInput("empty covariate column name");
    if (!names.insert(c).second) throw InvalidInput("column '" + c + "' is listed twice");
  }
}

CsvSchema default_schema(std::size_t p) {
  CsvSchema s;
  for (std::size_t j = 1; j <= p; ++j) s.covariate_columns.push_back("x" + std::to_string(j));
  s.standardize = Standardize::none;
  return s;
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("CSV header has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column(schema.outcome_column);
  const std::size_t t_col = column(schema.treatment_column);
  std::vector<std::size_t> x_cols;
  for (const auto& c : schema.covariate_columns) x_cols.push_back(column(c));

  std::vector<double> xs, ys;
  std::vector<int> ts;
  std::vector<std::size_t> bad_rows, bad_treatment;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      bad_rows.push_back(row);
      continue;
    }
    const auto y = parse_number(fields[y_col]);
    const auto t = parse_number(fields[t_col]);
    bool ok = y && t;
    std::vector<double> x;
    for (auto c : x_cols) {
      const auto v = parse_number(fields[c]);
      ok = ok && v.has_value();
      x.push_back(v.value_or(0.0));
    }
    if (!ok) {
      bad_rows.push_back(row);
      continue;
    }
    if (*t != 0.0 && *t != 1.0) {
      bad_treatment.push_back(row);
      continue;
    }
    xs.insert(xs.end(), x.begin(), x.end());
    ys.push_back(*y);
    ts.push_back(static_cast<int>(*t));
  }
  if (!bad_rows.empty())
    throw ValidationError(bad_rows.front(),
                          "non-numeric or missing fields in data rows " + row_list(bad_rows));
  if (!bad_treatment.empty())
    throw ValidationError(bad_treatment.front(), "treatment column '" + schema.treatment_column +
                                                     "' is not 0/1 in data rows " +
                                                     row_list(bad_treatment));
  if (ys.empty()) throw ValidationError(0, "CSV has no data rows");

  Dataset d;
  d.x = Eigen::Map<const CovariateMatrix>(xs.data(), static_cast<Eigen::Index>(ys.size()),
                                          static_cast<Eigen::Index>(x_cols.size()));
  d.t = std::move(ts);
  d.y = std::move(ys);
  standardize_columns(d.x, schema.standardize, schema.covariate_columns);
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  return parse_csv(in, schema);
}

std::vector<std::string> read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> out;
  for (auto f : split_fields(line)) out.emplace_back(f);
  return out;
}

void export_csv(std::ostream& out, const Dataset& d) {
  d.validate();
  for (std::size_t j = 1; j <= d.dim(); ++j) out << 'x' << j << ',';
  out << "t,y\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.row(i)) out << format_double17(v) << ',';
    out << d.t[i] << ',' << format_double17(d.y[i]) << '\n';
  }
}

void export_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  export_csv(out, d);
}

SplitPlan proportion_split(const Dataset& d, double inference_fraction, std::uint64_t seed) {
  if (!(inference_fraction > 0.0 && inference_fraction < 1.0))
    throw InvalidInput("inference fraction must lie in (0,1)");
  const std::size_t n = d.size();
  const auto k = static_cast<std::size_t>(std::floor(inference_fraction * static_cast<double>(n)));
  if (k < 2) throw InvalidInput("inference set would have fewer than two rows");
  if (k >= n) throw InvalidInput("learning set would be empty");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  SplitPlan plan;
  plan.inference.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  plan.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(k), perm.end());
  return plan;
}

double robust_sd(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("robust sd of an empty sample");
  return (quantile(values, 0.75) - quantile(values, 0.25)) / 1.349;
}

}  // namespace dnnate::ingest
