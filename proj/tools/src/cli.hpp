#pragma once

#include <iosfwd>

namespace fnmiss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEstimation = 3;
inline constexpr int kExitStudy = 4;

// Entry point of the `fnmiss` tool: subcommands estimate, simulate, bands.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fnmiss::cli
