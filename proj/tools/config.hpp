#pragma once

#include "tpmgrit/backends.hpp"
#include "tpmgrit/exec.hpp"
#include "tpmgrit/mgrit.hpp"
#include "tpmgrit/periodic.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tpmgrit::cli {

/// Flat experiment description. Every field maps to one `key = value` line.
struct ExperimentConfig {
    // backend
    std::string backend = "linear";  ///< linear | scalar | random | heat | nonlinear
    double lambda = 2.25;
    double cubic = 1.0;
    double amplitude = 1.0;
    double forcing = 1.0;
    double diffusivity = 1.0;
    std::size_t nx = 256;
    std::size_t size = 4;
    std::uint64_t seed = 0;

    // hierarchy
    std::size_t fine_points = 1025;
    double period = 1.024;
    std::size_t coarsen = 8;
    std::size_t max_levels = 2;
    std::size_t min_coarse = 2;

    // solver
    Relaxation relaxation = Relaxation::FCF;
    double residual_tol = 1e-9;
    ToleranceMode tol_mode = ToleranceMode::absolute;
    std::size_t max_iterations = 50;
    bool skip_first_down = true;
    CoarseOperator coarse_operator = CoarseOperator::rediscretized;

    // periodic
    bool periodic = true;
    double ic_tolerance = 1e-10;
    bool strict_fifo = false;

    // executor
    std::string mode = "auto";  ///< auto | serial | threaded
    std::size_t workers = 1;
    std::size_t repeat = 5;
    std::size_t watchdog_ms = 60000;

    // experiments
    std::size_t cycles = 8;
    std::string reference = "oracle";  ///< oracle | cycle:N
    std::vector<std::size_t> bench_workers{1, 2, 4, 8};
    std::vector<std::size_t> bench_coarsen{8};
    std::vector<Relaxation> bench_relaxations{Relaxation::FCF};

    std::string out = "out";

    /// Applies one `key = value` assignment; unknown keys and malformed
    /// values raise ConfigError.
    void set(const std::string& key, const std::string& value);
    /// Resolved assignments in canonical order.
    std::vector<std::pair<std::string, std::string>> entries() const;
    void validate() const;

    SolverConfig solver() const;
    PeriodicConfig periodic_config() const;
    ExecutorConfig executor() const;
    Hierarchy hierarchy() const;
    Hierarchy hierarchy(std::size_t coarsening) const;
    std::unique_ptr<Application> make_app() const;
};

/// Parses `key = value` lines with `#` comments into `config`.
void apply_text(ExperimentConfig& config, const std::string& text, const std::string& origin);
void apply_file(ExperimentConfig& config, const std::filesystem::path& path);
/// Splits a `key=value` override.
std::pair<std::string, std::string> split_assignment(const std::string& assignment);

/// Reads a meta.txt written by cmd_run; result keys are skipped.
ExperimentConfig load_meta(const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace tpmgrit::cli
