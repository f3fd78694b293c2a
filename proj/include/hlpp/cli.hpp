#pragma once

// lppsim command-line driver.
//
// Exit codes: 0 ok, 1 internal error, 2 invalid spec/flags/config,
// 3 size guard, 4 degenerate construction.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hlpp::cli {

inline constexpr std::string_view kToolName = "lppsim";
inline constexpr std::string_view kVersion = "0.3.0";

enum ExitCode : int { kOk = 0, kInternal = 1, kInvalid = 2, kSize = 3, kDegenerate = 4 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

std::string sha256_hex(std::string_view data);

}  // namespace hlpp::cli
