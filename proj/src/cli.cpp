#include "dnnate/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "dnnate/checks.hpp"
#include "dnnate/error.hpp"
#include "dnnate/format.hpp"
#include "dnnate/ingest.hpp"
#include "dnnate/rng.hpp"
#include "dnnate/stats.hpp"

namespace dnnate::cli {

namespace {

constexpr std::uint64_t kEstimateSplitStream = 0x5e11;
constexpr std::uint64_t kEstimateOutcomeStream = 3;
constexpr std::uint64_t kEstimatePropensityStream = 4;

nlohmann::json provenance_json(const harness::Provenance& p) {
  return {{"tool_version", p.tool_version},
          {"rng", p.rng},
          {"master_seed", p.master_seed},
          {"config_hash", p.config_hash}};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
}

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out;
  double ci_level = 0.95;
  bool dump = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* ci_opt = nullptr;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "config file of `key = value` lines");
  f.seed_opt = sub->add_option("--seed", f.seed, "master seed (key seed)");
  f.threads_opt = sub->add_option("--threads", f.threads, "worker threads (key threads)");
  f.out_opt = sub->add_option("--out", f.out, "output directory (key out)");
  f.ci_opt = sub->add_option("--ci-level", f.ci_level, "confidence level (key ci_level)");
  sub->add_option("--set", f.sets, "override a config key, KEY=VALUE; repeatable");
  sub->add_flag("--dump-config", f.dump, "print the resolved configuration and exit");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = load_config(f.config_path, cfg);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
    set_key(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.seed_opt->count()) cfg.seed = f.seed;
  if (f.threads_opt->count()) cfg.threads = f.threads;
  if (f.out_opt->count()) cfg.out = f.out;
  if (f.ci_opt->count()) cfg.ci_level = f.ci_level;
  return cfg;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

std::string config_hash(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.threads = 1;
  c.out.clear();
  return fnv1a_hex(dump_config(c));
}

harness::Provenance provenance(const RunConfig& cfg) {
  return {std::string(kToolVersion), std::string(kRngIdentity), cfg.seed, config_hash(cfg)};
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto exp = experiment_config(cfg);
  ensure_dir(cfg.out);
  std::size_t next_report = 0;
  const auto report = harness::run_experiment(exp, [&](std::size_t done, std::size_t total) {
    if (done * 10 >= next_report * total) {
      err << "replications " << done << "/" << total << "\n";
      err.flush();
      next_report = done * 10 / total + 1;
    }
  });
  const auto prov = provenance(cfg);
  const std::filesystem::path dir(cfg.out);
  {
    auto f = open_output(dir / "aggregate.csv");
    harness::write_aggregate_csv(f, report, exp, prov);
  }
  {
    auto f = open_output(dir / "replications.jsonl");
    harness::write_replications_jsonl(f, report, prov);
  }
  for (const auto& s : report.estimators) {
    const auto est = harness::estimates_of(s);
    const std::string name = "kde_" + std::string(to_string(s.method)) + ".csv";
    if (est.size() < 2 || !(sample_sd(est) > 0.0)) {
      err << "skipping " << name << ": estimates have no spread\n";
      continue;
    }
    auto f = open_output(dir / name);
    harness::write_kde_csv(f, harness::kde(est, cfg.kde_points), prov);
  }

  out << pad("estimator", 10) << pad("mean", 12) << pad("median", 12) << pad("sd", 12)
      << pad("mse", 12) << pad("coverage", 10) << "ks_p\n";
  for (const auto& s : report.estimators) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s%-12.6g%-12.6g%-12.6g%-12.6g%-10.4g",
                  std::string(to_string(s.method)).c_str(), s.aggregate.mean, s.aggregate.median,
                  s.aggregate.sd, s.aggregate.mse, s.coverage);
    out << line << (s.ks ? format_double(s.ks->p_value) : std::string("-")) << '\n';
  }
  out << "wrote " << (dir / "aggregate.csv").string() << ", "
      << (dir / "replications.jsonl").string() << "\n";
  return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  const auto methods = parse_estimators(cfg.estimate_estimators);
  const NuisanceSettings ns = nuisance_settings(cfg);
  const auto schema = csv_schema(cfg, ingest::read_header(cfg.data_path));
  const Dataset data = ingest::load_csv(cfg.data_path, schema);

  bool need_e = false;
  for (Method m : methods) need_e = need_e || m == Method::dr_split;

  std::vector<std::vector<AteResult>> runs(methods.size());
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, kEstimateSplitStream), r);
    const SplitPlan plan = ingest::proportion_split(data, cfg.inference_fraction, seed);
    const Dataset d1 = data.subset(plan.train);
    TrainConfig outcome_train = ns.outcome_train;
    outcome_train.seed = derive_seed(seed, kEstimateOutcomeStream);
    const auto m = fit_outcome_regression(d1, ns.outcome_arch, outcome_train, ns.trunc_const);
    std::optional<FittedPropensity> e;
    if (need_e) {
      TrainConfig propensity_train = ns.propensity_train;
      propensity_train.seed = derive_seed(seed, kEstimatePropensityStream);
      e = fit_propensity(d1, ns.propensity_arch, propensity_train, ns.clip);
    }
    for (std::size_t k = 0; k < methods.size(); ++k) {
      AteResult res = methods[k] == Method::split
                          ? ate_split(data, plan.inference, m.as_function(), cfg.ci_level)
                          : ate_dr_split(data, plan.inference, e->as_function(), m.as_function(),
                                         cfg.ci_level);
      if (m.single_arm) res.flags.emplace_back(kFlagSingleArm);
      runs[k].push_back(std::move(res));
    }
  }

  nlohmann::json estimators = nlohmann::json::object();
  for (std::size_t k = 0; k < methods.size(); ++k) {
    std::vector<double> est;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : runs[k]) {
      est.push_back(r.estimate);
      list.push_back(to_json(r));
    }
    estimators[std::string(to_string(methods[k]))] = {
        {"median", median(est)}, {"robust_sd", ingest::robust_sd(est)}, {"runs", std::move(list)}};
  }
  std::vector<std::string> covariates = schema.covariate_columns;
  const nlohmann::json doc = {
      {"provenance", provenance_json(provenance(cfg))},
      {"data",
       {{"path", cfg.data_path},
        {"rows", data.size()},
        {"treated", data.treated_count()},
        {"covariates", covariates},
        {"standardize", std::string(ingest::to_string(schema.standardize))}}},
      {"inference_fraction", cfg.inference_fraction},
      {"repeats", cfg.repeats},
      {"estimators", estimators}};

  ensure_dir(cfg.out);
  const auto path = std::filesystem::path(cfg.out) / "estimate.json";
  {
    auto f = open_output(path);
    f << doc.dump(2) << '\n';
  }
  out << doc.dump(2) << '\n';
  return kExitOk;
}

int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err,
              std::optional<double> inject_adam_beta1) {
  std::vector<std::string> suites;
  {
    std::string_view list = cfg.check_only;
    std::size_t start = 0;
    while (start <= list.size()) {
      const auto comma = list.find(',', start);
      std::string item(list.substr(start, comma == list.npos ? list.npos : comma - start));
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (!item.empty()) {
        const auto& names = checks::suite_names();
        if (std::find(names.begin(), names.end(), item) == names.end())
          throw ConfigError("unknown check suite '" + item + "'");
        suites.push_back(item);
      }
      if (comma == list.npos) break;
      start = comma + 1;
    }
  }
  if (suites.empty()) suites = checks::suite_names();

  checks::CheckOptions opts;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  opts.inject_adam_beta1 = inject_adam_beta1;
  std::vector<std::string> failed;
  for (const auto& suite : suites) {
    for (const auto& r : checks::run_suite(suite, opts)) {
      out << (r.passed ? "[PASS] " : "[FAIL] ") << r.suite << ": " << r.property << " ("
          << r.detail << ")\n";
      out.flush();
      if (!r.passed) failed.push_back(r.suite + ": " + r.property);
    }
  }
  if (failed.empty()) return kExitOk;
  err << failed.size() << " propert" << (failed.size() == 1 ? "y" : "ies") << " failed:\n";
  for (const auto& f : failed) err << "  " << f << '\n';
  return kExitFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Average treatment effect estimation with neural network nuisance fits", "dnnate"};
  app.require_subcommand(1);
  app.footer(config_reference());
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonFlags sim_flags, est_flags, chk_flags;
  auto* simulate = app.add_subcommand("simulate", "run a replicated simulation experiment");
  add_common(simulate, sim_flags);
  simulate->footer(config_reference());

  auto* estimate = app.add_subcommand("estimate", "estimate the ATE on a CSV dataset");
  add_common(estimate, est_flags);
  std::string data_path;
  std::size_t repeats = 1;
  double fraction = 0.3;
  auto* data_opt = estimate->add_option("--data", data_path, "CSV file (key data.path)");
  auto* repeats_opt =
      estimate->add_option("--repeats", repeats, "number of random splits (key estimate.repeats)");
  auto* fraction_opt = estimate->add_option("--fraction", fraction,
                                            "inference fraction (key estimate.inference_fraction)");
  estimate->footer(config_reference());

  auto* check = app.add_subcommand("check", "run the property suites");
  add_common(check, chk_flags);
  std::string only;
  double inject_beta1 = 0.0;
  auto* only_opt = check->add_option("--only", only, "comma list of suites (key check.only)");
  auto* inject_opt = check->add_option("--inject-adam-beta1", inject_beta1);
  inject_opt->group("");
  check->footer(config_reference());

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    RunConfig cfg;
    const CommonFlags* flags = simulate->parsed() ? &sim_flags
                               : estimate->parsed() ? &est_flags
                                                    : &chk_flags;
    cfg = resolve(*flags);
    std::string command;
    if (simulate->parsed()) {
      command = "simulate";
    } else if (estimate->parsed()) {
      command = "estimate";
      if (data_opt->count()) cfg.data_path = data_path;
      if (repeats_opt->count()) cfg.repeats = repeats;
      if (fraction_opt->count()) cfg.inference_fraction = fraction;
    } else {
      command = "check";
      if (only_opt->count()) cfg.check_only = only;
    }
    if (flags->dump) {
      out << dump_config(cfg);
      return kExitOk;
    }
    validate_for(cfg, command);
    if (command == "simulate") return cmd_simulate(cfg, out, err);
    if (command == "estimate") return cmd_estimate(cfg, out, err);
    return cmd_check(cfg, out, err,
                     inject_opt->count() ? std::optional<double>(inject_beta1) : std::nullopt);
  } catch (const ConfigError& e) {
    err << "dnnate: config error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const SchemaError& e) {
    err << "dnnate: schema error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ValidationError& e) {
    err << "dnnate: invalid data: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const InvalidInput& e) {
    err << "dnnate: invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "dnnate: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dnnate::cli
