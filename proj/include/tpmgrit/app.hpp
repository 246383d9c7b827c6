#pragma once

#include "tpmgrit/grid.hpp"

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tpmgrit {

/// Spatial degrees of freedom at one time point.
class StateVector {
public:
    StateVector() = default;
    explicit StateVector(std::size_t size, double value = 0.0) : values_(size, value) {}
    explicit StateVector(std::vector<double> values) : values_(std::move(values)) {}
    StateVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    bool all_finite() const noexcept;

    bool operator==(const StateVector&) const = default;

private:
    std::vector<double> values_;
};

/// Byte-for-byte equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
bool bitwise_equal(const StateVector& a, const StateVector& b) noexcept;

/// Time-stepping contract implemented by every problem.
///
/// step() realizes u_n = Phi_l(u_n, u_{n-1}) + g_n over [t_start, t_stop] on
/// level l. It must be deterministic and safe to call concurrently from
/// several workers; any scratch space is local to the call.
class Application {
public:
    virtual ~Application() = default;

    virtual std::size_t dimension() const = 0;
    virtual StateVector step(const StateVector& u, double t_start, double t_stop,
                             std::size_t level) const = 0;
    virtual StateVector init(double t) const = 0;

    /// Euclidean norm over the spatial degrees of freedom.
    virtual double spatial_norm(const StateVector& u) const;

    /// a*u + b*v. A zero coefficient drops its operand entirely, so
    /// linear_combine(1, u, 0, v) reproduces u bit for bit.
    virtual StateVector linear_combine(double a, const StateVector& u, double b,
                                       const StateVector& v) const;

    virtual std::optional<StateVector> analytic(double /*t*/) const { return std::nullopt; }

    /// True when step() is affine in u; enables the dense fixed-point oracle.
    virtual bool is_linear() const { return false; }

    /// Builds per-level solver caches for the step sizes of a hierarchy.
    /// Stepping without a prior prepare() must give identical results.
    virtual void prepare(const Hierarchy& /*hierarchy*/) {}

    StateVector zero() const { return StateVector(dimension()); }
};

/// Values of one level at every time point, plus the coarse-level FAS data.
struct SpaceTimeState {
    std::size_t level = 0;
    std::vector<StateVector> values;
    /// FAS right-hand side tau per point; empty on level 0.
    std::vector<StateVector> fas_rhs;
    /// Injected fine solution R_I u per point; empty on level 0.
    std::vector<StateVector> restricted_guess;

    std::size_t num_points() const noexcept { return values.size(); }
    bool has_fas() const noexcept { return !fas_rhs.empty(); }
};

enum class InitMode { from_init, zero, from_coarse_solve };

/// Allocates the state of one hierarchy level.
///
/// from_init evaluates app.init(t_n) at every point, zero fills zeros and
/// from_coarse_solve only allocates (zeros), leaving the fill to the solver.
SpaceTimeState initialize_state(const Application& app, const Hierarchy& hierarchy,
                                std::size_t level, InitMode mode);

/// sqrt(sum_n dt * |a_n - b_n|^2) over n = 0 .. N-2 (left-endpoint rule).
double state_distance(const SpaceTimeState& a, const SpaceTimeState& b, const Application& app,
                      double dt);

enum class ConvergedReason { residual_tol, ic_tol, max_iter };

std::string to_string(ConvergedReason reason);

struct PointResidual {
    std::size_t index = 0;  ///< fine-grid time index of the C-point
    double norm = 0.0;
};

struct PhaseTimings {
    double relax = 0.0;
    double residual = 0.0;
    double coarse = 0.0;
    double comm = 0.0;
};

/// Everything recorded by a solve.
///
/// Iteration 0 is the initialization (coarse seeding or F-relaxed initial
/// guess); iteration k >= 1 is one V-cycle. The residual of iteration k is
/// evaluated after that cycle's fine-grid relaxation, i.e. it measures the
/// state produced by k - 1 coarse-grid corrections.
struct RunReport {
    /// V-cycles run; the histories hold iterations + 1 entries.
    std::size_t iterations = 0;
    std::vector<double> residual_history;
    std::vector<std::vector<PointResidual>> pointwise_residuals;
    /// |u(T) - u(0)| seen by the residual evaluation of each iteration.
    std::vector<double> jump_history;
    /// Seconds since the start of the solve at the end of each iteration.
    std::vector<double> wall_clock;
    PhaseTimings timings;
    ConvergedReason converged_reason = ConvergedReason::max_iter;

    // Initial-condition update accounting (periodic solves only).
    std::size_t ic_deposits = 0;
    std::size_t ic_consumed = 0;
    std::size_t ic_stale = 0;
    std::optional<std::size_t> ic_converged_iteration;

    std::string residual_scope = "fine-level C-points";
};

}  // namespace tpmgrit
