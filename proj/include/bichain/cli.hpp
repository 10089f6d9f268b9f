#pragma once

#include <iosfwd>

namespace bichain {

/// Entry point of the `bichain` command. Returns the process exit code:
/// 0 success, 2 input error, 3 resource cap, 4 internal invariant violation.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bichain
