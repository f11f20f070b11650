#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace daedalus {

/// Runs the command line. Exit codes: 0 success, 2 usage or validation
/// error, 1 anything else. Output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace daedalus
