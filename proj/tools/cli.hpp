#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace talc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one `talc` command. args excludes the program name. Returns the
/// process exit code: 0 success, 1 numeric/internal failure, 2 usage or
/// validation error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace talc::cli
