#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ifthen {

// Entry point behind the `ifthen` binary: prepare | train | evaluate |
// predict. Returns the process exit code: 0 success, 1 IO failure,
// 2 validation/config failure, 3 numeric failure during training.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ifthen
