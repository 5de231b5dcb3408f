#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qmeas {

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool exhaustive = false;
  bool verbose = false;  // analyze: also report non-maximal closed subspaces
  std::vector<std::string> tol_overrides;  // key=value
};

/// Execute one command. Returns the process exit code:
/// 0 ok, 1 input, 2 resource, 3 simulation, 4 not-achievable.
int run_command(const CliOptions& opts);

/// Full argv entry point (CLI11 parsing + run_command).
int cli_main(int argc, char** argv);

}  // namespace qmeas
