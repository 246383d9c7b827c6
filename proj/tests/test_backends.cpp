#include "tpmgrit/backends.hpp"
#include "tpmgrit/errors.hpp"
#include "tpmgrit/mgrit.hpp"

#include "dense_oracle.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace tpmgrit;

namespace {

double max_diff(const StateVector& a, const StateVector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

Hierarchy fine_only(std::size_t n, double period) { return build_hierarchy(n, period, 4, 1, 2); }

}  // namespace

TEST_CASE("waveform") {
    CHECK(pulsatile_waveform(0.0, 2.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(pulsatile_waveform(1.0, 2.0) == doctest::Approx(1.0));
    CHECK(pulsatile_waveform(0.5, 2.0) == doctest::Approx(0.5));
    CHECK(pulsatile_waveform(0.3, 2.0) == doctest::Approx(pulsatile_waveform(2.3, 2.0)));
}

TEST_CASE("linear ODE: scalar backward Euler") {
    LinearOdeApp app(DenseMatrix(1, {-1.0}), {0.0}, 1.0);
    CHECK(app.step(StateVector{1.0}, 0.0, 1.0, 0)[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(app.init(0.0) == StateVector{0.0});
    CHECK_THROWS_AS(app.step(StateVector{1.0}, 1.0, 1.0, 0), StepError);
    CHECK_THROWS_AS(app.step(StateVector{1.0, 2.0}, 0.0, 1.0, 0), ArgumentError);
    CHECK_THROWS_AS(LinearOdeApp(DenseMatrix(1, {-1.0}), {0.0, 1.0}, 1.0), ArgumentError);
    CHECK_THROWS_AS(DenseMatrix(2, {1.0}), ArgumentError);
}

TEST_CASE("linear ODE: step against a dense solve") {
    LinearOdeApp app = LinearOdeApp::default_system(1.0);
    const StateVector u{0.3, -0.1, 0.7, 0.2};
    const double t0 = 0.2, t1 = 0.45, dt = t1 - t0;
    Eigen::MatrixXd a(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) a(i, j) = app.matrix()(i, j);
    Eigen::VectorXd b(4);
    for (std::size_t i = 0; i < 4; ++i) b(i) = app.forcing_direction()[i];
    const double f = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t1);
    const Eigen::VectorXd expect =
        (Eigen::MatrixXd::Identity(4, 4) - dt * a).fullPivLu().solve(oracle::vec(u) + dt * f * b);
    CHECK(max_diff(app.step(u, t0, t1, 0), oracle::state(expect)) <= 1e-14);
}

TEST_CASE("linear ODE: factorization cache does not change results") {
    LinearOdeApp app = LinearOdeApp::random(5, 11, 1.0);
    SolverConfig cfg;
    const Hierarchy h = hierarchy_for(cfg, 129, 1.0);
    const SpaceTimeState cold = propagate(app, h, app.init(0.0));
    app.prepare(h);
    CHECK(app.cached_factorizations() >= 2);
    const SpaceTimeState warm = propagate(app, h, app.init(0.0));
    for (std::size_t n = 0; n < cold.num_points(); ++n) CHECK(bitwise_equal(cold.values[n], warm.values[n]));
    app.clear_cache();
    CHECK(app.cached_factorizations() == 0);
}

TEST_CASE("linear ODE: random systems are seeded") {
    const LinearOdeApp a = LinearOdeApp::random(3, 5, 1.0);
    const LinearOdeApp b = LinearOdeApp::random(3, 5, 1.0);
    const LinearOdeApp c = LinearOdeApp::random(3, 6, 1.0);
    CHECK(a.matrix().a == b.matrix().a);
    CHECK(a.matrix().a != c.matrix().a);
}

TEST_CASE("linear steps are affine") {
    LinearOdeApp app = LinearOdeApp::default_system(1.0);
    const StateVector u{1.0, 2.0, -1.0, 0.5}, v{-0.3, 0.1, 0.4, 2.0};
    const StateVector z = app.step(app.zero(), 0.1, 0.2, 0);
    const StateVector su = app.linear_combine(1.0, app.step(u, 0.1, 0.2, 0), -1.0, z);
    const StateVector sv = app.linear_combine(1.0, app.step(v, 0.1, 0.2, 0), -1.0, z);
    const StateVector suv = app.linear_combine(1.0, app.step(app.linear_combine(2.0, u, 3.0, v), 0.1, 0.2, 0), -1.0, z);
    CHECK(max_diff(suv, app.linear_combine(2.0, su, 3.0, sv)) <= 1e-13);
}

TEST_CASE("heat: three interior points against a dense solve") {
    Heat1dApp app(3, 0.7, 2.0, 1.0);
    const StateVector u{0.1, 0.5, -0.2};
    const double t0 = 0.3, t1 = 0.35, dt = t1 - t0;
    const double h = 0.25, r = dt * 0.7 / (h * h);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i) {
        m(i, i) = 1.0 + 2.0 * r;
        if (i > 0) m(i, i - 1) = -r;
        if (i < 2) m(i, i + 1) = -r;
    }
    Eigen::VectorXd rhs = oracle::vec(u);
    rhs(0) += r * app.boundary_value(t1);
    CHECK(max_diff(app.step(u, t0, t1, 0), oracle::state(m.lu().solve(rhs))) <= 1e-14);
    CHECK(app.boundary_value(t1) == doctest::Approx(2.0 * pulsatile_waveform(t1, 1.0)));
    CHECK_THROWS_AS(Heat1dApp(0, 1.0, 1.0, 1.0), ArgumentError);
}

TEST_CASE("heat: a linear profile is steady under a constant boundary") {
    Heat1dApp app(15, 1.0, 3.0, 1.0, true);
    StateVector u(15);
    for (std::size_t i = 0; i < 15; ++i) u[i] = 3.0 * (1.0 - app.mesh_width() * static_cast<double>(i + 1));
    StateVector v = u;
    for (int k = 0; k < 20; ++k) v = app.step(v, 0.01 * k, 0.01 * (k + 1), 0);
    CHECK(max_diff(u, v) <= 1e-12);
}

TEST_CASE("nonlinear ODE: no cubic term matches the linear backend") {
    NonlinearOdeApp nl(2.0, 0.0, 1.5, 1.0, 0.3);
    LinearOdeApp lin(DenseMatrix(1, {-2.0}), {1.5}, 1.0, {0.3});
    CHECK(nl.is_linear());
    StateVector a = nl.init(0.0), b = lin.init(0.0);
    for (int k = 0; k < 50; ++k) {
        a = nl.step(a, 0.02 * k, 0.02 * (k + 1), 0);
        b = lin.step(b, 0.02 * k, 0.02 * (k + 1), 0);
    }
    CHECK(max_diff(a, b) <= 1e-13);
}

TEST_CASE("nonlinear ODE: Newton step against bisection") {
    NonlinearOdeApp app(1.0, 4.0, 2.0, 1.0);
    CHECK_FALSE(app.is_linear());
    for (double u0 : {-3.0, 0.0, 0.4, 5.0}) {
        const double t0 = 0.1, t1 = 0.35, dt = t1 - t0;
        const double f = 2.0 * pulsatile_waveform(t1, 1.0);
        auto g = [&](double v) { return v - u0 + dt * (v + 4.0 * v * v * v - f); };
        double lo = -10.0, hi = 10.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) > 0.0 ? hi : lo) = mid;
        }
        CHECK(app.step(StateVector{u0}, t0, t1, 0)[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-11));
    }
    CHECK_THROWS_AS(NonlinearOdeApp(-1.0, 1.0, 1.0, 1.0), ArgumentError);
}

TEST_CASE("nonlinear ODE: Newton failure is a step error") {
    NonlinearOdeApp app(0.0, 1.0, 0.0, 1.0);
    CHECK_THROWS_AS(app.step(StateVector{1e30}, 0.0, 1.0, 0), StepError);
}

TEST_CASE("periodic fixed point: linear") {
    LinearOdeApp app = LinearOdeApp::default_system(1.024);
    const Hierarchy h = fine_only(257, 1.024);
    const FixedPoint fp = periodic_fixed_point(app, h);
    CHECK(fp.cycles == 0);
    CHECK(max_diff(cycle_map(app, h, fp.u0), fp.u0) <= 1e-14);
    StateVector u = app.init(0.0);
    for (int q = 0; q < 200; ++q) u = cycle_map(app, h, u);
    CHECK(max_diff(u, fp.u0) <= 1e-12);

    const auto [m, c] = assemble_cycle_map(app, h);
    Eigen::MatrixXd dense(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) dense(i, j) = m(i, j);
    const double rho = dense.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(std::fabs(fp.spectral_radius - rho) <= 0.05 * rho);
}

TEST_CASE("periodic fixed point: scalar closed form") {
    // Unforced: the fixed point is 0 and the cycle map multiplies by (1 + lambda dt)^-(N-1).
    LinearOdeApp app(DenseMatrix(1, {-1.0}), {0.0}, 1.0);
    const Hierarchy h = fine_only(65, 1.0);
    const FixedPoint fp = periodic_fixed_point(app, h);
    CHECK(std::fabs(fp.u0[0]) <= 1e-15);
    CHECK(fp.spectral_radius == doctest::Approx(std::pow(1.0 + 1.0 / 64.0, -64.0)).epsilon(1e-6));
}

TEST_CASE("periodic fixed point: nonlinear iterates the cycle map") {
    NonlinearOdeApp app(1.0, 1.0, 1.0, 1.0);
    const Hierarchy h = fine_only(129, 1.0);
    const FixedPoint fp = periodic_fixed_point(app, h);
    CHECK(fp.cycles > 1);
    CHECK(max_diff(cycle_map(app, h, fp.u0), fp.u0) <= 1e-13);
    CHECK(fp.spectral_radius < 1.0);
}

TEST_CASE("periodic fixed point: non-contractive maps are rejected") {
    LinearOdeApp app = LinearOdeApp::scalar(-1.0, 1.0);
    CHECK_THROWS_AS(periodic_fixed_point(app, fine_only(65, 1.0)), OracleError);
}

TEST_CASE("sequential cycling") {
    LinearOdeApp app = LinearOdeApp::default_system(1.024);
    const Hierarchy h = fine_only(257, 1.024);
    const StateVector star = periodic_fixed_point(app, h).u0;
    const CycleTrace t = sequential_cycles(app, h, 6, app.init(0.0), star);
    REQUIRE(t.errors.size() == 6);
    CHECK(t.ends.front() == cycle_map(app, h, app.init(0.0)));
    for (std::size_t q = 1; q < 6; ++q) {
        CHECK(t.errors[q] < t.errors[q - 1]);
        CHECK(t.ends[q] == cycle_map(app, h, t.ends[q - 1]));
    }
    CHECK_THROWS_AS(sequential_cycles(app, h, 0, star, star), ArgumentError);

    const std::size_t q = cycles_to_tolerance(app, h, app.init(0.0), 1e-10, 1000);
    StateVector u = app.init(0.0);
    for (std::size_t k = 1; k < q; ++k) u = cycle_map(app, h, u);
    CHECK(app.spatial_norm(app.linear_combine(1.0, cycle_map(app, h, u), -1.0, u)) < 1e-10);
    CHECK_THROWS_AS(cycles_to_tolerance(app, h, app.init(0.0), 1e-10, 2), OracleError);
}
