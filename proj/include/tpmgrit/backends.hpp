#pragma once

#include "tpmgrit/app.hpp"
#include "tpmgrit/grid.hpp"

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace tpmgrit {

/// 0.5 + 0.5 cos(2 pi t / T - pi): zero at t = 0, peak at T / 2.
double pulsatile_waveform(double t, double period);

/// Row-major dense square matrix.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}
    DenseMatrix(std::size_t size, std::vector<double> values);

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static DenseMatrix identity(std::size_t size);
};

/// LU factors with partial pivoting.
class LuFactors {
public:
    LuFactors() = default;
    /// Throws ConfigError when the matrix is singular.
    explicit LuFactors(DenseMatrix m);

    std::vector<double> solve(std::vector<double> rhs) const;
    std::size_t size() const noexcept { return lu_.n; }

private:
    DenseMatrix lu_;
    std::vector<std::size_t> pivot_;
};

/// u' = A u + b f(t), backward Euler: (I - dt A) u_next = u + dt b f(t_stop).
class LinearOdeApp : public Application {
public:
    LinearOdeApp(DenseMatrix a, std::vector<double> forcing_direction, double period,
                 std::vector<double> initial = {});

    std::size_t dimension() const override { return a_.n; }
    StateVector step(const StateVector& u, double t_start, double t_stop, std::size_t level) const override;
    StateVector init(double t) const override;
    bool is_linear() const override { return true; }
    void prepare(const Hierarchy& hierarchy) override;

    const DenseMatrix& matrix() const noexcept { return a_; }
    const std::vector<double>& forcing_direction() const noexcept { return b_; }
    double period() const noexcept { return period_; }
    std::size_t cached_factorizations() const noexcept { return cache_.size(); }
    void clear_cache() { cache_.clear(); }

    /// Shipped 4x4 default (tridiagonal, eigenvalues real and negative).
    static LinearOdeApp default_system(double period);
    /// Scalar u' = -lambda u + f(t).
    static LinearOdeApp scalar(double lambda, double period, double forcing = 1.0);
    /// Seeded random stable system of the given size.
    static LinearOdeApp random(std::size_t size, std::uint64_t seed, double period);

private:
    LuFactors factor(double dt) const;

    DenseMatrix a_;
    std::vector<double> b_;
    double period_;
    std::vector<double> initial_;
    std::map<std::pair<std::size_t, double>, LuFactors> cache_;
};

/// u_t = nu u_xx on (0, 1), u(0, t) = amplitude * waveform(t), u(1, t) = 0,
/// second-order finite differences on n interior points, backward Euler.
class Heat1dApp : public Application {
public:
    Heat1dApp(std::size_t points, double diffusivity, double amplitude, double period,
              bool constant_boundary = false);

    std::size_t dimension() const override { return points_; }
    StateVector step(const StateVector& u, double t_start, double t_stop, std::size_t level) const override;
    StateVector init(double t) const override;
    bool is_linear() const override { return true; }

    double boundary_value(double t) const;
    double mesh_width() const noexcept { return 1.0 / static_cast<double>(points_ + 1); }
    double diffusivity() const noexcept { return nu_; }

private:
    std::size_t points_;
    double nu_;
    double amplitude_;
    double period_;
    bool constant_boundary_;
};

/// Scalar u' = -lambda u - c u^3 + a f(t), backward Euler solved by Newton.
class NonlinearOdeApp : public Application {
public:
    NonlinearOdeApp(double lambda, double cubic, double amplitude, double period, double initial = 0.0);

    std::size_t dimension() const override { return 1; }
    StateVector step(const StateVector& u, double t_start, double t_stop, std::size_t level) const override;
    StateVector init(double t) const override;
    bool is_linear() const override { return cubic_ == 0.0; }

    static constexpr double newton_tolerance = 1e-12;
    static constexpr int newton_max_iterations = 25;
    /// Below this residual the previous derivative is reused.
    static constexpr double reuse_threshold = 1e-6;

private:
    double lambda_;
    double cubic_;
    double amplitude_;
    double period_;
    double initial_;
};

/// u(T) after one period of fine-grid steps from u(0).
StateVector cycle_map(const Application& app, const Hierarchy& hierarchy, const StateVector& u0);

/// Fine-grid sequential solve seeded with u0.
SpaceTimeState propagate(const Application& app, const Hierarchy& hierarchy, const StateVector& u0);

struct FixedPoint {
    StateVector u0;
    /// Estimated spectral radius of the cycle map's linear part.
    double spectral_radius = 0.0;
    /// Cycles used by fixed-point iteration (0 for the direct linear solve).
    std::size_t cycles = 0;
};

/// Discrete periodic steady state u0 = S(u0) of the one-cycle map S.
/// Linear applications assemble S(u) = M u + c and solve (I - M) u0 = c;
/// others iterate S until successive starts differ by less than 1e-14.
FixedPoint periodic_fixed_point(const Application& app, const Hierarchy& hierarchy);

/// Dense M and c of a linear cycle map, assembled by propagation.
std::pair<DenseMatrix, std::vector<double>> assemble_cycle_map(const Application& app,
                                                               const Hierarchy& hierarchy);

/// Power-iteration estimate of the spectral radius.
double spectral_radius_estimate(const DenseMatrix& m);

struct CycleTrace {
    std::vector<StateVector> ends;  ///< u(T) of each cycle
    std::vector<double> errors;     ///< |u(T) - u0*| per cycle
};

/// q cycles of sequential stepping, each starting from the previous u(T).
CycleTrace sequential_cycles(const Application& app, const Hierarchy& hierarchy, std::size_t cycles,
                             const StateVector& ic, const StateVector& reference);

/// Cycles of sequential stepping until |u(T) - u(0)| < tol; returns the count.
std::size_t cycles_to_tolerance(const Application& app, const Hierarchy& hierarchy, const StateVector& ic,
                                double tol, std::size_t max_cycles);

}  // namespace tpmgrit
