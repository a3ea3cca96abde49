#pragma once

#include <string>
#include <vector>

namespace hypolab {

/// Batch front door. Exit codes: 0 ok, 2 config/validation error, 3 numerical
/// error (typed error serialized into report.json).
int run_cli(const std::vector<std::string>& args);

}  // namespace hypolab
