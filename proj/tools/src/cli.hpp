#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transit::cli {

/// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

/// argv[0] is the program name. Reports go to `out`, logs and errors to `err`.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_command(int argc, const char* const* argv);
/// Same, without the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transit::cli
