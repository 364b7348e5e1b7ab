#pragma once

// Experiment execution: builds problems from a RunConfig, runs the solves,
// and writes CSV datasets plus the run manifest into the output directory.
//
// Exit codes: 0 success, 2 config error, 3 solver non-convergence,
// 4 I/O error. The manifest is written even when a run fails.

#include <filesystem>

#include "hbeng/config.hpp"

namespace hbeng {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitIo = 4;

int run_experiment(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace hbeng
