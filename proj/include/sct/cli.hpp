#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "sct/model.hpp"
#include "sct/train_config.hpp"

namespace sct::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kUnknownKey = 3,
  kMissingPath = 4,
};

// Flat run configuration: every TrainConfig and ModelSpec field plus paths,
// as strings keyed by snake_case names. Flags use the same names with
// dashes (--samples-per-volume).
using RunConfig = std::map<std::string, std::string>;

RunConfig default_run_config();
// Parses `key = value` text; unknown keys raise UnknownKey.
RunConfig parse_run_config(const std::string& text, const RunConfig& base);
std::string format_run_config(const RunConfig& config);

TrainConfig train_config_from(const RunConfig& config);
ModelSpec model_spec_from(const RunConfig& config);

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sct::cli
