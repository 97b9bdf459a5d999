#pragma once

#include <string>
#include <vector>

namespace icepose {

// Full command-line entry point. `args` excludes the program name. Exit
// codes: 0 success, 1 usage error, 2 runtime failure.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace icepose
