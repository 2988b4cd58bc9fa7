#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lossnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCapped = 3;

/// Entry point shared by the `lossnet` binary and the tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lossnet::cli
