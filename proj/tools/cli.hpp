#pragma once

#include <string>
#include <vector>

namespace sasv::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

// Runs one `sasv` invocation. args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace sasv::cli
