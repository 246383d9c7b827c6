#include "tpmgrit/backends.hpp"

#include "tpmgrit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

namespace tpmgrit {

double pulsatile_waveform(double t, double period) {
    return 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * t / period - std::numbers::pi);
}

DenseMatrix::DenseMatrix(std::size_t size, std::vector<double> values) : n(size), a(std::move(values)) {
    if (a.size() != n * n) throw ArgumentError("dense matrix needs n*n entries");
}

DenseMatrix DenseMatrix::identity(std::size_t size) {
    DenseMatrix m(size);
    for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
    return m;
}

LuFactors::LuFactors(DenseMatrix m) : lu_(std::move(m)), pivot_(lu_.n) {
    const std::size_t n = lu_.n;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
        }
        if (lu_(p, k) == 0.0) throw ConfigError("singular matrix in LU factorization");
        pivot_[k] = p;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double l = lu_(i, k) / lu_(k, k);
            lu_(i, k) = l;
            for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
        }
    }
}

std::vector<double> LuFactors::solve(std::vector<double> x) const {
    const std::size_t n = lu_.n;
    for (std::size_t k = 0; k < n; ++k) {
        if (pivot_[k] != k) std::swap(x[k], x[pivot_[k]]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
        x[i] /= lu_(i, i);
    }
    return x;
}

LinearOdeApp::LinearOdeApp(DenseMatrix a, std::vector<double> forcing_direction, double period,
                           std::vector<double> initial)
    : a_(std::move(a)), b_(std::move(forcing_direction)), period_(period), initial_(std::move(initial)) {
    if (a_.n == 0) throw ArgumentError("linear ODE needs at least one unknown");
    if (b_.size() != a_.n) throw ArgumentError("forcing direction has the wrong length");
    if (initial_.empty()) initial_.assign(a_.n, 0.0);
    if (initial_.size() != a_.n) throw ArgumentError("initial value has the wrong length");
    if (!(period_ > 0.0)) throw ArgumentError("period must be positive");
}

LuFactors LinearOdeApp::factor(double dt) const {
    DenseMatrix m = DenseMatrix::identity(a_.n);
    for (std::size_t k = 0; k < m.a.size(); ++k) m.a[k] -= dt * a_.a[k];
    return LuFactors(std::move(m));
}

void LinearOdeApp::prepare(const Hierarchy& hierarchy) {
    cache_.clear();
    for (std::size_t l = 0; l < hierarchy.num_levels(); ++l) {
        std::set<double> dts;
        for (std::size_t n = 1; n < hierarchy.level(l).num_points; ++n) {
            dts.insert(hierarchy.time(l, n) - hierarchy.time(l, n - 1));
        }
        for (double dt : dts) cache_.emplace(std::make_pair(l, dt), factor(dt));
    }
}

StateVector LinearOdeApp::step(const StateVector& u, double t_start, double t_stop, std::size_t level) const {
    const double dt = t_stop - t_start;
    if (!(dt > 0.0)) throw StepError("linear step needs t_stop > t_start");
    if (u.size() != a_.n) throw ArgumentError("linear step: state has the wrong length");
    const double f = pulsatile_waveform(t_stop, period_);
    std::vector<double> rhs(a_.n);
    for (std::size_t i = 0; i < a_.n; ++i) rhs[i] = u[i] + dt * b_[i] * f;
    auto it = cache_.find({level, dt});
    if (it != cache_.end()) return StateVector(it->second.solve(std::move(rhs)));
    return StateVector(factor(dt).solve(std::move(rhs)));
}

StateVector LinearOdeApp::init(double /*t*/) const { return StateVector(initial_); }

LinearOdeApp LinearOdeApp::default_system(double period) {
    DenseMatrix a(4, {-2.0, 1.0, 0.0, 0.0,
                      0.5, -3.0, 1.0, 0.0,
                      0.0, 0.5, -4.0, 1.0,
                      0.0, 0.0, 0.5, -5.0});
    return LinearOdeApp(std::move(a), {1.0, 0.5, 0.25, 0.125}, period);
}

LinearOdeApp LinearOdeApp::scalar(double lambda, double period, double forcing) {
    return LinearOdeApp(DenseMatrix(1, {-lambda}), {forcing}, period);
}

LinearOdeApp LinearOdeApp::random(std::size_t size, std::uint64_t seed, double period) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DenseMatrix a(size);
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            a(i, j) = i == j ? -(1.0 + 3.0 * unit(rng)) : 0.4 * (unit(rng) - 0.5) / static_cast<double>(size);
        }
    }
    std::vector<double> b(size);
    for (auto& v : b) v = unit(rng);
    return LinearOdeApp(std::move(a), std::move(b), period);
}

Heat1dApp::Heat1dApp(std::size_t points, double diffusivity, double amplitude, double period,
                     bool constant_boundary)
    : points_(points), nu_(diffusivity), amplitude_(amplitude), period_(period),
      constant_boundary_(constant_boundary) {
    if (points_ < 1) throw ArgumentError("heat problem needs at least one interior point");
    if (!(nu_ > 0.0)) throw ArgumentError("diffusivity must be positive");
}

double Heat1dApp::boundary_value(double t) const {
    return constant_boundary_ ? amplitude_ : amplitude_ * pulsatile_waveform(t, period_);
}

StateVector Heat1dApp::step(const StateVector& u, double t_start, double t_stop, std::size_t /*level*/) const {
    const double dt = t_stop - t_start;
    if (!(dt > 0.0)) throw StepError("heat step needs t_stop > t_start");
    if (u.size() != points_) throw ArgumentError("heat step: state has the wrong length");
    const double h = mesh_width();
    const double r = dt * nu_ / (h * h);
    const std::size_t n = points_;
    // Thomas algorithm on diag 1 + 2r, off-diagonals -r.
    std::vector<double> c(n), d(n);
    const double diag = 1.0 + 2.0 * r;
    d[0] = u[0] + r * boundary_value(t_stop);
    for (std::size_t i = 1; i < n; ++i) d[i] = u[i];
    c[0] = -r / diag;
    d[0] /= diag;
    for (std::size_t i = 1; i < n; ++i) {
        const double denom = diag + r * c[i - 1];
        c[i] = -r / denom;
        d[i] = (d[i] + r * d[i - 1]) / denom;
    }
    StateVector out(n);
    out[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = d[i] - c[i] * out[i + 1];
    return out;
}

StateVector Heat1dApp::init(double /*t*/) const { return StateVector(points_); }

NonlinearOdeApp::NonlinearOdeApp(double lambda, double cubic, double amplitude, double period, double initial)
    : lambda_(lambda), cubic_(cubic), amplitude_(amplitude), period_(period), initial_(initial) {
    if (lambda_ < 0.0 || cubic_ < 0.0) throw ArgumentError("nonlinear ODE needs lambda, cubic >= 0");
}

StateVector NonlinearOdeApp::step(const StateVector& u, double t_start, double t_stop, std::size_t /*level*/) const {
    const double dt = t_stop - t_start;
    if (!(dt > 0.0)) throw StepError("nonlinear step needs t_stop > t_start");
    const double prev = u[0];
    const double forcing = amplitude_ * pulsatile_waveform(t_stop, period_);
    auto residual = [&](double v) { return v - prev + dt * (lambda_ * v + cubic_ * v * v * v - forcing); };
    auto derivative = [&](double v) { return 1.0 + dt * (lambda_ + 3.0 * cubic_ * v * v); };

    double v = prev;
    double r = residual(v);
    double slope = derivative(v);
    for (int k = 0; k < newton_max_iterations; ++k) {
        if (std::abs(r) < newton_tolerance) return StateVector{v};
        if (std::abs(r) >= reuse_threshold) slope = derivative(v);
        v -= r / slope;
        r = residual(v);
    }
    if (std::abs(r) < newton_tolerance) return StateVector{v};
    throw StepError("Newton did not converge in " + std::to_string(newton_max_iterations) +
                    " iterations (|r| = " + std::to_string(std::abs(r)) + ", dt = " + std::to_string(dt) + ")");
}

StateVector NonlinearOdeApp::init(double /*t*/) const { return StateVector{initial_}; }

StateVector cycle_map(const Application& app, const Hierarchy& hierarchy, const StateVector& u0) {
    StateVector u = u0;
    for (std::size_t n = 1; n < hierarchy.fine_points(); ++n) {
        u = app.step(u, hierarchy.time(0, n - 1), hierarchy.time(0, n), 0);
    }
    return u;
}

SpaceTimeState propagate(const Application& app, const Hierarchy& hierarchy, const StateVector& u0) {
    SpaceTimeState state;
    state.level = 0;
    state.values.reserve(hierarchy.fine_points());
    state.values.push_back(u0);
    for (std::size_t n = 1; n < hierarchy.fine_points(); ++n) {
        state.values.push_back(app.step(state.values.back(), hierarchy.time(0, n - 1), hierarchy.time(0, n), 0));
    }
    return state;
}

std::pair<DenseMatrix, std::vector<double>> assemble_cycle_map(const Application& app,
                                                               const Hierarchy& hierarchy) {
    const std::size_t n = app.dimension();
    const StateVector c = cycle_map(app, hierarchy, app.zero());
    DenseMatrix m(n);
    for (std::size_t j = 0; j < n; ++j) {
        StateVector e(n);
        e[j] = 1.0;
        const StateVector col = cycle_map(app, hierarchy, e);
        for (std::size_t i = 0; i < n; ++i) m(i, j) = col[i] - c[i];
    }
    return {std::move(m), c.data()};
}

double spectral_radius_estimate(const DenseMatrix& m) {
    const std::size_t n = m.n;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return std::sqrt(s);
    };
    auto apply = [&](const std::vector<double>& v) {
        std::vector<double> y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) y[i] += m(i, j) * v[j];
        return y;
    };
    // Geometric mean growth over a trailing window damps oscillating pairs.
    constexpr int burn_in = 400;
    constexpr int window = 100;
    double log_growth = 0.0;
    for (int k = 0; k < burn_in + window; ++k) {
        const double before = norm(x);
        if (before == 0.0) return 0.0;
        for (auto& e : x) e /= before;
        x = apply(x);
        const double after = norm(x);
        if (after == 0.0) return 0.0;
        if (k >= burn_in) log_growth += std::log(after);
    }
    return std::exp(log_growth / window);
}

FixedPoint periodic_fixed_point(const Application& app, const Hierarchy& hierarchy) {
    FixedPoint fp;
    if (app.is_linear()) {
        auto [m, c] = assemble_cycle_map(app, hierarchy);
        fp.spectral_radius = spectral_radius_estimate(m);
        if (!(fp.spectral_radius < 1.0)) {
            throw OracleError("cycle map is not contractive (spectral radius estimate " +
                              std::to_string(fp.spectral_radius) + ")");
        }
        DenseMatrix lhs = DenseMatrix::identity(m.n);
        for (std::size_t k = 0; k < lhs.a.size(); ++k) lhs.a[k] -= m.a[k];
        fp.u0 = StateVector(LuFactors(std::move(lhs)).solve(std::move(c)));
        return fp;
    }
    constexpr std::size_t max_cycles = 100000;
    StateVector u = app.zero();
    double previous_step = 0.0;
    for (std::size_t k = 1; k <= max_cycles; ++k) {
        StateVector next = cycle_map(app, hierarchy, u);
        const double d = app.spatial_norm(app.linear_combine(1.0, next, -1.0, u));
        if (!next.all_finite()) throw OracleError("fixed-point cycling produced non-finite values");
        if (k > 1 && previous_step > 0.0) fp.spectral_radius = d / previous_step;
        u = std::move(next);
        fp.cycles = k;
        if (d < 1e-14) {
            fp.u0 = std::move(u);
            return fp;
        }
        if (k > 50 && d > previous_step) {
            throw OracleError("fixed-point cycling diverges (step " + std::to_string(d) + " after " +
                              std::to_string(k) + " cycles)");
        }
        previous_step = d;
    }
    throw OracleError("fixed-point cycling did not converge");
}

CycleTrace sequential_cycles(const Application& app, const Hierarchy& hierarchy, std::size_t cycles,
                             const StateVector& ic, const StateVector& reference) {
    if (cycles < 1) throw ArgumentError("need at least one cycle");
    CycleTrace trace;
    StateVector u = ic;
    for (std::size_t q = 0; q < cycles; ++q) {
        u = cycle_map(app, hierarchy, u);
        trace.errors.push_back(app.spatial_norm(app.linear_combine(1.0, u, -1.0, reference)));
        trace.ends.push_back(u);
    }
    return trace;
}

std::size_t cycles_to_tolerance(const Application& app, const Hierarchy& hierarchy, const StateVector& ic,
                                double tol, std::size_t max_cycles) {
    StateVector u = ic;
    for (std::size_t q = 1; q <= max_cycles; ++q) {
        StateVector next = cycle_map(app, hierarchy, u);
        const double jump = app.spatial_norm(app.linear_combine(1.0, next, -1.0, u));
        u = std::move(next);
        if (jump < tol) return q;
    }
    throw OracleError("sequential cycling did not reach the tolerance in " + std::to_string(max_cycles) +
                      " cycles");
}

}  // namespace tpmgrit
