#pragma once

// Observational data from CSV: schema-driven loading, covariate scaling,
// proportional learning/inference splits and robust summaries.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnnate/dataset.hpp"

namespace dnnate::ingest {

enum class Standardize { none, zscore, minmax };

std::string_view to_string(Standardize s);
Standardize parse_standardize(std::string_view name);

struct CsvSchema {
  std::string outcome_column = "y";
  std::string treatment_column = "t";
  std::vector<std::string> covariate_columns;
  Standardize standardize = Standardize::minmax;

  void validate() const;
};

// Columns x1..xp, t, y with no scaling; the layout export_csv writes.
CsvSchema default_schema(std::size_t p);

// Comma-separated, header first, decimal-point numerals. Missing columns raise
// SchemaError; bad rows raise ValidationError naming the 1-based data rows.
Dataset parse_csv(std::istream& in, const CsvSchema& schema);
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
// Column names of the first line.
std::vector<std::string> read_header(const std::filesystem::path& path);

// Writes x1..xp,t,y with 17 significant digits.
void export_csv(std::ostream& out, const Dataset& d);
void export_csv(const std::filesystem::path& path, const Dataset& d);

// floor(fraction * n) rows drawn without replacement form the inference set.
SplitPlan proportion_split(const Dataset& d, double inference_fraction, std::uint64_t seed);

// IQR / 1.349 with linear-interpolation quartiles.
double robust_sd(std::span<const double> values);

}  // namespace dnnate::ingest
