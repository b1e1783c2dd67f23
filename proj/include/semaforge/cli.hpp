#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semaforge::cli {

/// Runs one `semaforge` invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on a domain error and 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semaforge::cli
