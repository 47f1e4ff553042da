#pragma once

#include <string>
#include <vector>

namespace cico {

// Entry point shared by the binary and the tests. args excludes the program
// name. Returns the process exit code: 0 on success, 1 for usage or data
// validation failures, 2 for filesystem failures.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace cico
