#pragma once

#include "config.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

namespace tpmgrit::cli {

inline constexpr std::string_view residuals_header = "iteration,cpoint_index,residual_norm";
inline constexpr std::string_view summary_header = "iteration,aggregate_residual,jump_norm,wall_clock_s";
inline constexpr std::string_view convergence_header =
    "k,seq_cycle_error,mgrit_iter_error,seq_spacetime_error,mgrit_spacetime_error";
inline constexpr std::string_view speedup_header =
    "workers,m,relaxation,best_wall_clock_s,speedup_vs_baseline";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3 };

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// residuals.csv, summary.csv and meta.txt in config.out.
void cmd_run(const ExperimentConfig& config, std::ostream& out);
/// convergence.csv in config.out.
void cmd_compare(const ExperimentConfig& config, std::ostream& out);
/// speedup.csv in config.out.
void cmd_bench(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
/// Prints the periodic fixed point and the cycle-map spectral radius.
void cmd_oracle(const ExperimentConfig& config, std::ostream& out);

/// Validates the config, runs one command and maps errors to exit codes.
int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& out,
             std::ostream& err);

}  // namespace tpmgrit::cli
