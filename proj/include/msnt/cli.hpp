#pragma once

#include <string>

namespace msnt {

// Exit statuses of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

std::string version_string();

int run_cli(int argc, char** argv);

}  // namespace msnt
