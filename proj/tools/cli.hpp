#pragma once

#include <iosfwd>

namespace bhmm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the bhmm tool: subcommands simulate, fit, eval, benchmark.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bhmm
