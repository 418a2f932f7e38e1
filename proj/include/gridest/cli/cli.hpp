#pragma once

#include <string>
#include <vector>

namespace gridest::cli {

// Entry point behind the `gridest` binary. Exit codes: 0 success, 1 domain
// problems (non-radial model, unobservable placement, divergence, findings),
// 2 usage and file problems.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace gridest::cli
