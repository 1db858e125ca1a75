#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace govprobe::cli {

/// Entry point behind the govprobe executable. Exit codes: 0 success,
/// 1 usage or validation error, 2 I/O error. Data goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace govprobe::cli
