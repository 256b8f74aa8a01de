#pragma once

#include "config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace efbm::cli {

enum ExitCode : int { kPass = 0, kViolation = 1, kConfigError = 2, kResourceExceeded = 3 };

struct RunContext {
  ExperimentConfig config;
  bool json = false;
  std::optional<std::string> only;
  bool no_simulate = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

int cmd_kernel_verify(const RunContext& ctx);
int cmd_simulate(const RunContext& ctx);
int cmd_density(const RunContext& ctx);
int cmd_bounds(const RunContext& ctx);
int cmd_malliavin(const RunContext& ctx);
int cmd_report(const RunContext& ctx);

/// Full command line (argv[0] included); maps exceptions to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace efbm::cli
