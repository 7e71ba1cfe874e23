#pragma once

#include <iosfwd>

namespace packlab {

/// Entry point of the `pack` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace packlab
