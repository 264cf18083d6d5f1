#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;  ///< bad flags, missing paths, out-of-range options
inline constexpr int kExitData = 3;   ///< any library error raised while computing

/// Runs the `dan` command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dan::cli
