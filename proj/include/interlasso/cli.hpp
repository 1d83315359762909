#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace interlasso {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `interlasso` binary. `args` excludes the program
/// name; subcommands are path, ib, synth and validate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a, used as the data fingerprint in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace interlasso
