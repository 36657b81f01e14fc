#pragma once

// The cbqg command line as a library: run_cli is what main() calls, and what
// tests call in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace cbqg::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

/// args excludes the program name, e.g. {"preprocess", "--input", "x.jsonl", ...}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace cbqg::cli
