#pragma once

#include <string>
#include <vector>

namespace oscl {

/// Process exit codes of the `oscl` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitNoMode = 2,
  kExitConditioning = 3,
  kExitData = 4,
  kExitUsage = 5,
  kExitNumeric = 6,
};

int run_cli(int argc, char** argv);

/// Same as above with arguments after the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace oscl
