#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace envlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNotDetermined = 3;

// Runs the envlab command line; JSON results go to `out` (or --out), messages
// to `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Same, with args excluding the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace envlab
