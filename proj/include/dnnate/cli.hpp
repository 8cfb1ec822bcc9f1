#pragma once

// The dnnate command line: simulate, estimate and check.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dnnate/config.hpp"
#include "dnnate/harness.hpp"

namespace dnnate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;

// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Hash of the configuration with threads and out reset, so it names the
// experiment rather than how it was executed.
std::string config_hash(const RunConfig& cfg);
harness::Provenance provenance(const RunConfig& cfg);

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err,
              std::optional<double> inject_adam_beta1 = std::nullopt);

}  // namespace dnnate::cli
