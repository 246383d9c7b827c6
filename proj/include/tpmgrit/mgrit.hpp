#pragma once

#include "tpmgrit/app.hpp"
#include "tpmgrit/grid.hpp"
#include "tpmgrit/pass.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace tpmgrit {

enum class CoarseOperator {
    rediscretized,  ///< Phi_l is the application's step with the coarse dt
    exact_power,    ///< one coarse step applies Phi_0 once per fine interval
};

enum class ToleranceMode { absolute, relative };

std::string_view to_string(CoarseOperator op);
std::string_view to_string(ToleranceMode mode);

struct SolverConfig {
    Relaxation relaxation = Relaxation::FCF;
    std::size_t coarsen = 8;
    std::size_t max_levels = 2;
    std::size_t min_coarse = 2;
    double residual_tol = 1e-9;
    /// relative compares against the residual of iteration 1.
    ToleranceMode tol_mode = ToleranceMode::absolute;
    std::size_t max_iterations = 50;
    bool skip_first_down = true;
    CoarseOperator coarse_operator = CoarseOperator::rediscretized;

    void validate() const;
};

struct SolveResult {
    SpaceTimeState state;
    RunReport report;
};

struct CPointResidual {
    std::size_t index = 0;  ///< index on the level
    StateVector residual;
};

/// u_n for n in (from, to], each from the previous point. Coarse levels add
/// the FAS right-hand side after the step.
void sequential_solve(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
                      std::size_t from, std::size_t to, const SolverConfig& config = {});

/// Recomputes every F-point from its preceding C-point.
void f_relax(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
             const SolverConfig& config = {});

/// Recomputes every C-point except index 0 from its preceding F-point.
void c_relax(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
             const SolverConfig& config = {});

void fcf_relax(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
               const SolverConfig& config = {});

/// r_c = Phi(u_{c-1}) + tau_c - u_c at every C-point; r_0 = 0.
std::vector<CPointResidual> compute_residual(const Application& app, const Hierarchy& hierarchy,
                                             const SpaceTimeState& state,
                                             const SolverConfig& config = {});

/// Injects the fine C-point values into the next level and sets the FAS
/// right-hand side tau_k = r_k + v_k - Phi_{l+1}(v_{k-1}).
void fas_restrict(const Application& app, const Hierarchy& hierarchy, const SpaceTimeState& fine,
                  const std::vector<CPointResidual>& fine_residuals, SpaceTimeState& coarse,
                  const SolverConfig& config = {});

/// Adds the coarse correction (v - R_I u) to the fine C-points, then F-relaxes.
void interpolate_and_correct(const Application& app, const Hierarchy& hierarchy,
                             const SpaceTimeState& coarse, SpaceTimeState& fine,
                             const SolverConfig& config = {});

/// One V-cycle starting at `level`: relax, residual, restrict, recurse (or
/// solve the coarsest level sequentially), interpolate.
void vcycle(const Application& app, const Hierarchy& hierarchy, const SolverConfig& config,
            std::vector<SpaceTimeState>& states, std::size_t level);

/// Non-periodic MGRIT on a single worker.
SolveResult solve(const Application& app, const Hierarchy& hierarchy, const SolverConfig& config);

/// Builds the hierarchy a config describes for a fine grid.
Hierarchy hierarchy_for(const SolverConfig& config, std::size_t fine_points, double period);

}  // namespace tpmgrit
