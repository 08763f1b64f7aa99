#pragma once

#include "groom/error.hpp"

#include <ostream>

namespace groom {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// 2 for usage, configuration and input-file problems; 3 for gateway,
/// provider and processing failures.
int exit_code_for(ErrorCode code);

/// Entry point of the `groom` command. Machine-readable output goes to `out`,
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace groom
