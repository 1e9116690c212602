#pragma once

#include <ostream>

namespace tactwin {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDiverged = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitStaleCalibration = 4;
inline constexpr int kExitContract = 5;

/// Entry point of the `tactwin` tool. Subcommands: generate, calibrate,
/// decode, eval, train-toy, resolution, roundtrip. Returns the process exit
/// code; errors are reported on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tactwin
