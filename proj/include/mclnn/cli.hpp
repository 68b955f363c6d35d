#pragma once

#include <string>
#include <vector>

namespace mclnn::cli {

// Full command-line entry point; returns the process exit status.
//   0 success, 1 usage, 2 config violation, 3 I/O failure, 4 bad data,
//   5 training divergence.
int run(int argc, const char* const* argv);

// Convenience overload for in-process tests; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace mclnn::cli
