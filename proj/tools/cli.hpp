#pragma once

#include <ostream>

namespace storykg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // pipeline or replay failure, MISMATCH
inline constexpr int kExitUsage = 2;     // bad arguments, unreadable input files
inline constexpr int kExitCorrupt = 3;   // CorruptLog

// Subcommands: run, replay, stats report, stats compare, serve.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace storykg::cli
