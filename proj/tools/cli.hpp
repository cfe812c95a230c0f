#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vitalws::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `vitalws` invocation. `args` excludes the program name. Failures
/// print one line `error: <code>: <message>` to `err`; usage errors use the
/// code `usage` and exit 2, library errors exit 1.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vitalws::cli
