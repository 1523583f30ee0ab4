#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace glossdom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;

/// Runs the command line. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glossdom::cli
