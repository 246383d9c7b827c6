#include "tpmgrit/backends.hpp"
#include "tpmgrit/errors.hpp"
#include "tpmgrit/exec.hpp"

#include <doctest.h>

#include <algorithm>
#include <thread>

using namespace tpmgrit;
using namespace std::chrono_literals;

namespace {

ExecutorConfig threaded(std::size_t workers) {
    ExecutorConfig e;
    e.workers = workers;
    e.mode = ExecutionMode::threaded;
    e.watchdog = 20s;
    return e;
}

void check_identical(const SolveResult& a, const SolveResult& b) {
    CHECK(a.report.iterations == b.report.iterations);
    CHECK(a.report.converged_reason == b.report.converged_reason);
    REQUIRE(a.report.residual_history.size() == b.report.residual_history.size());
    for (std::size_t k = 0; k < a.report.residual_history.size(); ++k) {
        CHECK(a.report.residual_history[k] == b.report.residual_history[k]);
        CHECK(a.report.jump_history[k] == b.report.jump_history[k]);
    }
    REQUIRE(a.state.num_points() == b.state.num_points());
    bool same = true;
    for (std::size_t n = 0; n < a.state.num_points(); ++n) {
        same = same && bitwise_equal(a.state.values[n], b.state.values[n]);
    }
    CHECK(same);
}

}  // namespace

TEST_CASE("executor config") {
    ExecutorConfig e;
    e.workers = 2;
    CHECK_THROWS_AS(e.validate(), ConfigError);
    e.workers = 0;
    e.mode = ExecutionMode::threaded;
    CHECK_THROWS_AS(e.validate(), ConfigError);
    CHECK(to_string(ExecutionMode::threaded) == "threaded");
}

TEST_CASE("serial mode rejects several workers") {
    LinearOdeApp app = LinearOdeApp::scalar(1.0, 1.0);
    SolverConfig cfg;
    ExecutorConfig e;
    e.workers = 4;
    CHECK_THROWS_AS(run(app, hierarchy_for(cfg, 65, 1.0), cfg, nullptr, e), ConfigError);
}

TEST_CASE("one threaded worker equals the serial run") {
    LinearOdeApp app = LinearOdeApp::default_system(1.024);
    SolverConfig cfg;
    const Hierarchy h = hierarchy_for(cfg, 257, 1.024);
    const PeriodicConfig pc;
    const SolveResult serial = run(app, h, cfg, &pc, ExecutorConfig{});
    check_identical(serial, run(app, h, cfg, &pc, threaded(1)));
    check_identical(serial, solve_periodic(app, h, cfg, pc));
}

TEST_CASE("results do not depend on the worker count") {
    LinearOdeApp app = LinearOdeApp::default_system(1.024);
    for (Relaxation rel : {Relaxation::F, Relaxation::FCF}) {
        for (bool periodic : {false, true}) {
            SolverConfig cfg;
            cfg.relaxation = rel;
            cfg.max_levels = 3;
            const Hierarchy h = hierarchy_for(cfg, 1025, 1.024);
            const PeriodicConfig pc;
            const PeriodicConfig* p = periodic ? &pc : nullptr;
            const SolveResult ref = run(app, h, cfg, p, ExecutorConfig{});
            for (std::size_t w : {2u, 3u, 4u, 8u}) {
                CAPTURE(w);
                CAPTURE(periodic);
                const SolveResult r = run(app, h, cfg, p, threaded(w));
                check_identical(ref, r);
                if (periodic) {
                    CHECK(r.report.ic_deposits == ref.report.ic_deposits);
                    CHECK(r.report.ic_consumed == ref.report.ic_consumed);
                    CHECK(r.report.ic_stale == ref.report.ic_stale);
                    CHECK(r.report.ic_converged_iteration == ref.report.ic_converged_iteration);
                }
            }
        }
    }
}

TEST_CASE("nonlinear FAS is worker independent") {
    NonlinearOdeApp app(1.0, 1.0, 1.0, 1.0);
    SolverConfig cfg;
    const Hierarchy h = hierarchy_for(cfg, 513, 1.0);
    const PeriodicConfig pc;
    check_identical(run(app, h, cfg, &pc, ExecutorConfig{}), run(app, h, cfg, &pc, threaded(4)));
}

TEST_CASE("periodic accounting with four workers") {
    LinearOdeApp app = LinearOdeApp::default_system(1.024);
    SolverConfig cfg;
    const Hierarchy h = hierarchy_for(cfg, 1025, 1.024);
    const PeriodicConfig pc;
    const SolveResult r = run(app, h, cfg, &pc, threaded(4));
    CHECK(r.report.converged_reason == ConvergedReason::ic_tol);
    CHECK(r.report.ic_deposits >= r.report.ic_consumed);
    CHECK(r.report.ic_consumed >= r.report.iterations - 1);
    CHECK(r.report.ic_stale <= r.report.ic_deposits);
}

TEST_CASE("channel") {
    Channel c;
    BoundaryMessage m;
    m.pass = 7;
    c.push(m);
    CHECK(c.pending() == 1);
    auto got = c.pop(1s);
    REQUIRE(got.has_value());
    CHECK(got->pass == 7);
    CHECK_FALSE(c.pop(10ms).has_value());
    c.close();
    CHECK(c.closed());
}

TEST_CASE("threaded transport") {
    ThreadedTransport t(3, 200ms);
    const PassContext ctx{4, PassKind::f_relax, 0, 1};
    BoundaryMessage m;
    m.kind = BoundaryMessage::Kind::left_value;
    m.pass = 4;
    m.payload = StateVector{1.5};
    std::thread sender([&] { t.send(0, 1, m); });
    const BoundaryMessage got = t.receive(0, 1, BoundaryMessage::Kind::left_value, 4, ctx);
    sender.join();
    CHECK(got.payload == StateVector{1.5});

    t.send(0, 2, m);
    CHECK(t.undelivered() == 1);
    CHECK_THROWS_AS(t.receive(0, 2, BoundaryMessage::Kind::left_value, 5, ctx), ProtocolError);
    CHECK_THROWS_AS(t.receive(1, 2, BoundaryMessage::Kind::left_value, 4, ctx), ProtocolError);

    ThreadedTransport slow(2, 10s);
    std::thread closer2([&] {
        std::this_thread::sleep_for(20ms);
        slow.close_all();
    });
    CHECK_THROWS_AS(slow.receive(0, 1, BoundaryMessage::Kind::left_value, 1, ctx), ProtocolError);
    closer2.join();
}

TEST_CASE("measure and best_of") {
    int calls = 0;
    const double best = best_of(3, [&] { ++calls; });
    CHECK(calls == 3);
    CHECK(best >= 0.0);
    LinearOdeApp app = LinearOdeApp::scalar(1.0, 1.0);
    SolverConfig cfg;
    const Measurement m = measure(app, hierarchy_for(cfg, 65, 1.0), cfg, nullptr, ExecutorConfig{}, 2);
    CHECK(m.samples.size() == 2);
    CHECK(m.best_seconds == *std::min_element(m.samples.begin(), m.samples.end()));
}
