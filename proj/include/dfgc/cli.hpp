#pragma once

#include <iosfwd>

namespace dfgc::cli {

/// Entry point of the `dfgc` tool. Returns the process exit code:
/// 0 success, 1 runtime or domain error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dfgc::cli
