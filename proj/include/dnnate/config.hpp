#pragma once

// Run configuration: a flat, commented `key = value` document with dotted
// sections. Every key has a default; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dnnate/estimators.hpp"
#include "dnnate/harness.hpp"
#include "dnnate/ingest.hpp"

namespace dnnate::cli {

struct NetSection {
  std::string arch = "dense";       // dense | hierarchical
  std::string hidden = "auto";      // comma list of widths, or auto = 3 x (p + 1)
  std::string activation = "sigmoid";
  std::string clip_alpha = "none";  // none or a positive bound
  int level = 0;
  int K = 1;
  int p_star = 1;
  int M = 4;
  double alpha = 10.0;
  double lr = 0.001;
  std::size_t batch_size = 128;
  std::size_t epochs = 800;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct RunConfig {
  std::uint64_t seed = 20220520;
  std::size_t threads = 1;
  std::string out = "out";
  double ci_level = 0.95;

  std::size_t dgp_p = 50;
  double dgp_tau = 1.0;
  double dgp_noise_sd = 1.0;

  std::size_t inference_n = 1000;
  std::size_t train_ratio = 5;
  std::size_t replications = 200;
  std::string experiment_estimators = "split,dr_split";
  std::string nuisance = "fitted";
  std::size_t kde_points = 512;

  NetSection outcome;
  double trunc_const = 2.0;
  NetSection propensity = [] {
    NetSection s;
    s.epochs = 100;
    return s;
  }();
  std::string clip_mode = "fixed";
  double clip_lo = 0.01;
  double clip_c2 = 10.0;

  std::string data_path;
  std::string data_outcome = "y";
  std::string data_treatment = "t";
  std::string data_covariates;  // empty: every other column
  std::string data_standardize = "minmax";

  double inference_fraction = 0.3;
  std::size_t repeats = 1;
  std::string estimate_estimators = "split,dr_split";

  std::string check_only;  // empty: all suites
};

struct KeyInfo {
  std::string key;
  std::string help;
};

// Every key in dump order, with its description.
const std::vector<KeyInfo>& config_keys();

// Applies one `key = value` assignment; throws ConfigError for unknown keys or bad values.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_key(const RunConfig& cfg, std::string_view key);

// Parses a config document on top of `base`. Throws ConfigError with the line number.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// Commented document that parse_config reads back to the same configuration.
std::string dump_config(const RunConfig& cfg);

// Help text listing every key, its default and meaning.
std::string config_reference();

// Typed views; throw ConfigError when a value does not validate.
harness::ExperimentConfig experiment_config(const RunConfig& cfg);
NuisanceSettings nuisance_settings(const RunConfig& cfg);
std::vector<Method> parse_estimators(std::string_view list);
// Schema for data.*; an empty covariate list is filled from `header`.
ingest::CsvSchema csv_schema(const RunConfig& cfg, const std::vector<std::string>& header);

// Checks every section relevant to `command` (simulate, estimate, check).
void validate_for(const RunConfig& cfg, std::string_view command);

}  // namespace dnnate::cli
