#pragma once

#include <string>
#include <vector>

namespace fkuq::cli {

/// Entry point of the `fkuq` tool. `args` excludes the program name.
/// Returns 0 on success, 1 on invalid input, 2 on numerical failure.
int run(const std::vector<std::string>& args);

int run(int argc, char** argv);

}  // namespace fkuq::cli
