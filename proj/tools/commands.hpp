#pragma once

#include <string>
#include <vector>

namespace snapture::cli {

/// Runs the command line `args` (without the program name) and returns the
/// process exit code. Errors are reported on stderr.
int run(const std::vector<std::string> &args);

} // namespace snapture::cli
