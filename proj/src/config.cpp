#include "dnnate/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dnnate/error.hpp"
#include "dnnate/format.hpp"

namespace dnnate::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(want) + ")");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || value.empty())
    bad_value(key, value, "an integer");
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || value.empty())
    bad_value(key, value, "a number");
  return out;
}

struct Entry {
  std::string key;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Entry integer(std::string key, std::string help, T RunConfig::*field) {
  return {key, std::move(help), [field](const RunConfig& c) { return std::to_string(c.*field); },
          [field, key](RunConfig& c, std::string_view v) { c.*field = parse_integer<T>(key, v); }};
}

Entry real(std::string key, std::string help, double RunConfig::*field) {
  return {key, std::move(help), [field](const RunConfig& c) { return format_double(c.*field); },
          [field, key](RunConfig& c, std::string_view v) { c.*field = parse_real(key, v); }};
}

Entry text(std::string key, std::string help, std::string RunConfig::*field) {
  return {std::move(key), std::move(help), [field](const RunConfig& c) { return c.*field; },
          [field](RunConfig& c, std::string_view v) { c.*field = std::string(v); }};
}

void add_net_section(std::vector<Entry>& out, const std::string& prefix,
                     NetSection RunConfig::*section, const std::string& what) {
  auto key = [&](const char* name) { return prefix + "." + name; };
  auto add_text = [&](const char* name, std::string help, std::string NetSection::*field) {
    out.push_back({key(name), std::move(help),
                   [section, field](const RunConfig& c) { return (c.*section).*field; },
                   [section, field](RunConfig& c, std::string_view v) {
                     (c.*section).*field = std::string(v);
                   }});
  };
  auto add_int = [&](const char* name, std::string help, auto NetSection::*field) {
    using T = std::remove_reference_t<decltype(std::declval<NetSection>().*field)>;
    const std::string k = key(name);
    out.push_back({k, std::move(help),
                   [section, field](const RunConfig& c) { return std::to_string((c.*section).*field); },
                   [section, field, k](RunConfig& c, std::string_view v) {
                     (c.*section).*field = parse_integer<T>(k, v);
                   }});
  };
  auto add_real = [&](const char* name, std::string help, double NetSection::*field) {
    const std::string k = key(name);
    out.push_back({k, std::move(help),
                   [section, field](const RunConfig& c) { return format_double((c.*section).*field); },
                   [section, field, k](RunConfig& c, std::string_view v) {
                     (c.*section).*field = parse_real(k, v);
                   }});
  };
  add_text("arch", what + " network: dense or hierarchical", &NetSection::arch);
  add_text("hidden", "dense hidden widths, comma separated; auto = three layers of p+1",
           &NetSection::hidden);
  add_text("activation", "hidden activation: sigmoid or relu", &NetSection::activation);
  add_text("clip_alpha", "coefficient clip bound, or none", &NetSection::clip_alpha);
  add_int("level", "hierarchical level l", &NetSection::level);
  add_int("K", "hierarchical number of summed blocks per level", &NetSection::K);
  add_int("p_star", "hierarchical order p*", &NetSection::p_star);
  add_int("M", "hierarchical block width M", &NetSection::M);
  add_real("alpha", "hierarchical coefficient bound", &NetSection::alpha);
  add_real("lr", "Adam learning rate", &NetSection::lr);
  add_int("batch_size", "mini-batch size", &NetSection::batch_size);
  add_int("epochs", "training epochs", &NetSection::epochs);
  add_real("beta1", "Adam first-moment decay", &NetSection::beta1);
  add_real("beta2", "Adam second-moment decay", &NetSection::beta2);
  add_real("epsilon", "Adam epsilon", &NetSection::epsilon);
}

struct Section {
  std::string title;
  std::size_t first;  // index of the first entry in the section
};

struct Registry {
  std::vector<Entry> entries;
  std::vector<Section> sections;
};

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    auto& e = r.entries;
    r.sections.push_back({"general", e.size()});
    e.push_back(integer("seed", "master seed for every random stream", &RunConfig::seed));
    e.push_back(integer("threads", "worker threads for replications (output does not depend on it)",
                        &RunConfig::threads));
    e.push_back(text("out", "output directory", &RunConfig::out));
    e.push_back(real("ci_level", "confidence level of reported intervals", &RunConfig::ci_level));

    r.sections.push_back({"simulation design", e.size()});
    e.push_back(integer("dgp.p", "covariate dimension (>= 3)", &RunConfig::dgp_p));
    e.push_back(real("dgp.tau", "true treatment effect", &RunConfig::dgp_tau));
    e.push_back(real("dgp.noise_sd", "standard deviation of the outcome noise", &RunConfig::dgp_noise_sd));

    r.sections.push_back({"replication experiment (simulate)", e.size()});
    e.push_back(integer("experiment.inference_n", "inference sample size n",
                        &RunConfig::inference_n));
    e.push_back(integer("experiment.train_ratio", "learning sample size is train_ratio * n",
                        &RunConfig::train_ratio));
    e.push_back(integer("experiment.replications", "number of replications R",
                        &RunConfig::replications));
    e.push_back(text("experiment.estimators", "comma list from split, dr_split",
                     &RunConfig::experiment_estimators));
    e.push_back(text("experiment.nuisance", "fitted (networks) or oracle (true m and e)",
                     &RunConfig::nuisance));
    e.push_back(integer("experiment.kde_points", "grid points of the exported densities",
                        &RunConfig::kde_points));

    r.sections.push_back({"outcome regression network", e.size()});
    add_net_section(e, "outcome", &RunConfig::outcome, "outcome regression");
    e.push_back(real("outcome.trunc_const", "predictions are truncated at trunc_const * ln(n_train)",
                     &RunConfig::trunc_const));

    r.sections.push_back({"propensity network", e.size()});
    add_net_section(e, "propensity", &RunConfig::propensity, "propensity score");
    e.push_back(text("propensity.clip_mode", "fixed: [clip_lo, 1-clip_lo]; log: lo = 1/(clip_c2 ln n)",
                     &RunConfig::clip_mode));
    e.push_back(real("propensity.clip_lo", "lower propensity bound in fixed mode", &RunConfig::clip_lo));
    e.push_back(real("propensity.clip_c2", "constant of the log-mode bound", &RunConfig::clip_c2));

    r.sections.push_back({"observational data (estimate)", e.size()});
    e.push_back(text("data.path", "CSV file to estimate on", &RunConfig::data_path));
    e.push_back(text("data.outcome", "outcome column name", &RunConfig::data_outcome));
    e.push_back(text("data.treatment", "0/1 treatment column name", &RunConfig::data_treatment));
    e.push_back(text("data.covariates", "comma list of covariate columns; empty = all other columns",
                     &RunConfig::data_covariates));
    e.push_back(text("data.standardize", "covariate scaling: none, zscore or minmax",
                     &RunConfig::data_standardize));
    e.push_back(real("estimate.inference_fraction", "share of rows drawn into the inference set",
                     &RunConfig::inference_fraction));
    e.push_back(integer("estimate.repeats", "number of random splits (median and robust sd when > 1)",
                        &RunConfig::repeats));
    e.push_back(text("estimate.estimators", "comma list from split, dr_split",
                     &RunConfig::estimate_estimators));

    r.sections.push_back({"property checks (check)", e.size()});
    e.push_back(text("check.only", "comma list of suites to run; empty = all", &RunConfig::check_only));
    return r;
  }();
  return reg;
}

const Entry& find_entry(std::string_view key) {
  for (const auto& e : registry().entries)
    if (e.key == key) return e;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> split_list(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = trim(list.substr(start, comma == list.npos ? list.npos : comma - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == list.npos) break;
    start = comma + 1;
  }
  return out;
}

NetArchitecture net_architecture(const NetSection& s, const std::string& prefix) {
  NetArchitecture a;
  try {
    if (s.arch == "dense") {
      a.kind = NetArchitecture::Kind::dense;
    } else if (s.arch == "hierarchical") {
      a.kind = NetArchitecture::Kind::hierarchical;
    } else {
      bad_value(prefix + ".arch", s.arch, "dense or hierarchical");
    }
    if (s.hidden != "auto") {
      for (const auto& w : split_list(s.hidden)) {
        const auto width = parse_integer<std::size_t>(prefix + ".hidden", w);
        if (width == 0) bad_value(prefix + ".hidden", s.hidden, "positive widths");
        a.hidden.push_back(width);
      }
      if (a.hidden.empty()) bad_value(prefix + ".hidden", s.hidden, "auto or a width list");
    }
    a.activation = parse_activation(s.activation);
    if (s.clip_alpha != "none") {
      const double c = parse_real(prefix + ".clip_alpha", s.clip_alpha);
      if (!(c > 0.0)) bad_value(prefix + ".clip_alpha", s.clip_alpha, "none or a positive number");
      a.clip_alpha = c;
    }
    a.hierarchical.level = s.level;
    a.hierarchical.K = s.K;
    a.hierarchical.p_star = s.p_star;
    a.hierarchical.M = s.M;
    a.hierarchical.alpha = s.alpha;
    a.hierarchical.input_dim = 1;
    if (a.kind == NetArchitecture::Kind::hierarchical) a.hierarchical.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(prefix + ": " + e.what());
  }
  return a;
}

TrainConfig train_config(const NetSection& s, const std::string& prefix) {
  TrainConfig t;
  t.learning_rate = s.lr;
  t.batch_size = s.batch_size;
  t.epochs = s.epochs;
  t.adam_beta1 = s.beta1;
  t.adam_beta2 = s.beta2;
  t.adam_epsilon = s.epsilon;
  try {
    t.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(prefix + ": " + e.what());
  }
  return t;
}

}  // namespace

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = [] {
    std::vector<KeyInfo> out;
    for (const auto& e : registry().entries) out.push_back({e.key, e.help});
    return out;
  }();
  return keys;
}

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_entry(key).set(cfg, trim(value));
}

std::string get_key(const RunConfig& cfg, std::string_view key) { return find_entry(key).get(cfg); }

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == text.npos ? text.npos : end - start);
    start = end == text.npos ? text.size() : end + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == line.npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string dump_config(const RunConfig& cfg) {
  const auto& reg = registry();
  std::string out = "# dnnate run configuration\n";
  std::size_t next_section = 0;
  for (std::size_t i = 0; i < reg.entries.size(); ++i) {
    if (next_section < reg.sections.size() && reg.sections[next_section].first == i) {
      out += "\n# --- " + reg.sections[next_section].title + "\n";
      ++next_section;
    }
    out += "# " + reg.entries[i].help + "\n";
    out += reg.entries[i].key + " = " + reg.entries[i].get(cfg) + "\n";
  }
  return out;
}

std::string config_reference() {
  const RunConfig defaults;
  std::string out = "Config keys (file lines `key = value`, or --set key=value):\n";
  for (const auto& e : registry().entries) {
    out += "  " + e.key + " = " + e.get(defaults) + "\n      " + e.help + "\n";
  }
  return out;
}

std::vector<Method> parse_estimators(std::string_view list) {
  std::vector<Method> out;
  for (const auto& name : split_list(list)) {
    try {
      const Method m = parse_method(name);
      if (m != Method::split && m != Method::dr_split)
        throw ConfigError("estimator '" + name + "' is not available here (use split, dr_split)");
      for (Method seen : out)
        if (seen == m) throw ConfigError("estimator '" + name + "' listed twice");
      out.push_back(m);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  if (out.empty()) throw ConfigError("estimator list is empty");
  return out;
}

NuisanceSettings nuisance_settings(const RunConfig& cfg) {
  NuisanceSettings s;
  s.outcome_arch = net_architecture(cfg.outcome, "outcome");
  s.outcome_train = train_config(cfg.outcome, "outcome");
  s.trunc_const = cfg.trunc_const;
  if (!(s.trunc_const > 0.0))
    bad_value("outcome.trunc_const", format_double(cfg.trunc_const), "a positive number");
  s.propensity_arch = net_architecture(cfg.propensity, "propensity");
  s.propensity_train = train_config(cfg.propensity, "propensity");
  if (cfg.clip_mode == "fixed") {
    s.clip.mode = ClipSpec::Mode::fixed;
  } else if (cfg.clip_mode == "log") {
    s.clip.mode = ClipSpec::Mode::log;
  } else {
    bad_value("propensity.clip_mode", cfg.clip_mode, "fixed or log");
  }
  s.clip.lo = cfg.clip_lo;
  s.clip.c2 = cfg.clip_c2;
  if (!(cfg.clip_lo > 0.0 && cfg.clip_lo < 0.5))
    bad_value("propensity.clip_lo", format_double(cfg.clip_lo), "a number in (0, 0.5)");
  if (!(cfg.clip_c2 > 0.0))
    bad_value("propensity.clip_c2", format_double(cfg.clip_c2), "a positive number");
  return s;
}

harness::ExperimentConfig experiment_config(const RunConfig& cfg) {
  harness::ExperimentConfig e;
  e.dgp.p = cfg.dgp_p;
  e.dgp.tau = cfg.dgp_tau;
  e.dgp.noise_sd = cfg.dgp_noise_sd;
  e.inference_n = cfg.inference_n;
  e.train_ratio = cfg.train_ratio;
  e.estimators = parse_estimators(cfg.experiment_estimators);
  e.nuisance = nuisance_settings(cfg);
  try {
    e.source = harness::parse_nuisance_source(cfg.nuisance);
  } catch (const InvalidInput&) {
    bad_value("experiment.nuisance", cfg.nuisance, "fitted or oracle");
  }
  e.replications = cfg.replications;
  e.master_seed = cfg.seed;
  e.ci_level = cfg.ci_level;
  e.threads = cfg.threads;
  try {
    e.validate();
  } catch (const InvalidInput& err) {
    throw ConfigError(err.what());
  }
  return e;
}

ingest::CsvSchema csv_schema(const RunConfig& cfg, const std::vector<std::string>& header) {
  ingest::CsvSchema s;
  s.outcome_column = cfg.data_outcome;
  s.treatment_column = cfg.data_treatment;
  s.covariate_columns = split_list(cfg.data_covariates);
  if (s.covariate_columns.empty()) {
    for (const auto& h : header)
      if (h != s.outcome_column && h != s.treatment_column) s.covariate_columns.push_back(h);
  }
  try {
    s.standardize = ingest::parse_standardize(cfg.data_standardize);
    s.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  return s;
}

void validate_for(const RunConfig& cfg, std::string_view command) {
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0))
    bad_value("ci_level", format_double(cfg.ci_level), "a number in (0,1)");
  if (cfg.threads < 1) bad_value("threads", std::to_string(cfg.threads), "at least 1");
  if (cfg.kde_points < 2)
    bad_value("experiment.kde_points", std::to_string(cfg.kde_points), "at least 2");
  if (command == "simulate") {
    experiment_config(cfg);
  } else if (command == "estimate") {
    nuisance_settings(cfg);
    parse_estimators(cfg.estimate_estimators);
    if (cfg.data_path.empty()) throw ConfigError("data.path is required for estimate");
    if (!(cfg.inference_fraction > 0.0 && cfg.inference_fraction < 1.0))
      bad_value("estimate.inference_fraction", format_double(cfg.inference_fraction),
                "a number in (0,1)");
    if (cfg.repeats < 1) bad_value("estimate.repeats", std::to_string(cfg.repeats), "at least 1");
    try {
      ingest::parse_standardize(cfg.data_standardize);
    } catch (const InvalidInput&) {
      bad_value("data.standardize", cfg.data_standardize, "none, zscore or minmax");
    }
  }
}

}  // namespace dnnate::cli
