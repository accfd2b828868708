#pragma once

namespace uxpr::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 malformed flags, 2 bad input file, 3 internal
/// invariant violation.
int run(int argc, const char* const* argv);
inline int run(int argc, char** argv) { return run(argc, const_cast<const char* const*>(argv)); }

}  // namespace uxpr::cli
