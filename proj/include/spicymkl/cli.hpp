#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mkl {

/// Exit status contract of the command-line front end.
enum ExitCode : int
{
    kExitOk = 0,
    kExitNumerical = 1, ///< numerical failure or unconverged training
    kExitUsage = 2      ///< bad arguments, unreadable or invalid input
};

/// Runs `spicymkl train|predict|bench ...`. argv[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

} // namespace mkl
