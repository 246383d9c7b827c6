#include "tpmgrit/app.hpp"

#include "tpmgrit/errors.hpp"

#include <cmath>
#include <cstring>

namespace tpmgrit {

bool StateVector::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

bool bitwise_equal(const StateVector& a, const StateVector& b) noexcept {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0);
}

double Application::spatial_norm(const StateVector& u) const {
    double sum = 0.0;
    for (double v : u.values()) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

StateVector Application::linear_combine(double a, const StateVector& u, double b,
                                        const StateVector& v) const {
    if (u.size() != v.size()) {
        throw ArgumentError("linear_combine: dimension mismatch");
    }
    StateVector out(u.size());
    if (b == 0.0) {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = a * u[i];
    } else if (a == 0.0) {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = b * v[i];
    } else {
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = a * u[i] + b * v[i];
    }
    return out;
}

SpaceTimeState initialize_state(const Application& app, const Hierarchy& hierarchy,
                                std::size_t level, InitMode mode) {
    const auto& spec = hierarchy.level(level);
    SpaceTimeState state;
    state.level = level;
    state.values.reserve(spec.num_points);
    for (std::size_t n = 0; n < spec.num_points; ++n) {
        state.values.push_back(mode == InitMode::from_init ? app.init(hierarchy.time(level, n))
                                                           : app.zero());
    }
    if (level > 0) {
        state.fas_rhs.assign(spec.num_points, app.zero());
        state.restricted_guess.assign(spec.num_points, app.zero());
    }
    return state;
}

double state_distance(const SpaceTimeState& a, const SpaceTimeState& b, const Application& app,
                      double dt) {
    if (a.level != b.level || a.num_points() != b.num_points()) {
        throw ArgumentError("state_distance: states live on different grids");
    }
    double sum = 0.0;
    for (std::size_t n = 0; n + 1 < a.num_points(); ++n) {
        if (a.values[n].size() != b.values[n].size()) {
            throw ArgumentError("state_distance: dimension mismatch at time index " + std::to_string(n));
        }
        const double d = app.spatial_norm(app.linear_combine(1.0, a.values[n], -1.0, b.values[n]));
        sum += dt * d * d;
    }
    return std::sqrt(sum);
}

std::string to_string(ConvergedReason reason) {
    switch (reason) {
        case ConvergedReason::residual_tol: return "residual_tol";
        case ConvergedReason::ic_tol: return "ic_tol";
        case ConvergedReason::max_iter: return "max_iter";
    }
    return "unknown";
}

}  // namespace tpmgrit
