#include "tpmgrit/mgrit.hpp"

#include "tpmgrit/errors.hpp"
#include "tpmgrit/periodic.hpp"
#include "tpmgrit/worker.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

namespace tpmgrit {

std::string_view to_string(Relaxation relaxation) {
    return relaxation == Relaxation::F ? "F" : "FCF";
}

std::string_view to_string(PassKind kind) {
    switch (kind) {
        case PassKind::seed: return "seed";
        case PassKind::f_relax: return "f_relax";
        case PassKind::c_relax: return "c_relax";
        case PassKind::residual: return "residual";
        case PassKind::restrict: return "restrict";
        case PassKind::coarse_solve: return "coarse_solve";
        case PassKind::interpolate: return "interpolate";
    }
    return "unknown";
}

std::string_view to_string(CoarseOperator op) {
    return op == CoarseOperator::rediscretized ? "rediscretized" : "exact_power";
}

std::string_view to_string(ToleranceMode mode) {
    return mode == ToleranceMode::absolute ? "absolute" : "relative";
}

std::string_view to_string(BoundaryMessage::Kind kind) {
    switch (kind) {
        case BoundaryMessage::Kind::left_value: return "left_value";
        case BoundaryMessage::Kind::ic_update: return "ic_update";
        case BoundaryMessage::Kind::residual_partial: return "residual_partial";
        case BoundaryMessage::Kind::halt_vote: return "halt_vote";
    }
    return "unknown";
}

void SolverConfig::validate() const {
    if (coarsen < 2) throw ConfigError("coarsening factor must be at least 2");
    if (max_levels < 1) throw ConfigError("max_levels must be at least 1");
    if (min_coarse < 2) throw ConfigError("min_coarse must be at least 2");
    if (!(residual_tol >= 0.0)) throw ConfigError("residual_tol must be non-negative");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
}

Hierarchy hierarchy_for(const SolverConfig& config, std::size_t fine_points, double period) {
    return build_hierarchy(fine_points, period, config.coarsen, config.max_levels, config.min_coarse);
}

namespace {

/// Applies Phi_l on a level, optionally routing level-0 steps through the
/// periodic controller, and attaches time indices to step failures.
class Stepper {
public:
    Stepper(const Application& app, const Hierarchy& hierarchy, const SolverConfig& config)
        : app_(app), hierarchy_(hierarchy), config_(config) {}

    void set_controller(PeriodicController* controller) { controller_ = controller; }

    /// Plain Phi_l from point n - 1 to point n of a level (no FAS term).
    StateVector phi(std::size_t level, const StateVector& u, std::size_t n) const {
        return guarded(level, n, [&] { return phi_unguarded(level, u, n); });
    }

    /// Value of point n from point n - 1 of the state, FAS term included.
    StateVector step(SpaceTimeState& state, std::size_t n, const PassContext* ctx) const {
        return guarded(state.level, n, [&] {
            StateVector out;
            if (state.level == 0 && controller_ && ctx) {
                out = controller_->fine_step(app_, state.values[n - 1], hierarchy_.time(0, n - 1),
                                             hierarchy_.time(0, n), *ctx);
            } else {
                out = phi_unguarded(state.level, state.values[n - 1], n);
            }
            if (state.has_fas()) {
                out = app_.linear_combine(1.0, out, 1.0, state.fas_rhs[n]);
            }
            return out;
        });
    }

    StateVector residual(SpaceTimeState& state, std::size_t c, const PassContext* ctx) const {
        return app_.linear_combine(1.0, step(state, c, ctx), -1.0, state.values[c]);
    }

    StateVector tau(std::size_t coarse_level, const StateVector& fine_residual, const StateVector& v,
                    const StateVector& v_prev, std::size_t k) const {
        const StateVector defect = app_.linear_combine(1.0, v, -1.0, phi(coarse_level, v_prev, k));
        return app_.linear_combine(1.0, fine_residual, 1.0, defect);
    }

    StateVector corrected(const StateVector& u, const StateVector& v, const StateVector& guess) const {
        return app_.linear_combine(1.0, u, 1.0, app_.linear_combine(1.0, v, -1.0, guess));
    }

    /// F-points of the interval starting at C-point c.
    void relax_interval(SpaceTimeState& state, std::size_t c, const PassContext* ctx) const {
        const std::size_t m = hierarchy_.coarsen(state.level);
        for (std::size_t j = c + 1; j < c + m && j < state.num_points(); ++j) {
            state.values[j] = step(state, j, ctx);
        }
    }

    void relax_range(SpaceTimeState& state, std::size_t begin, std::size_t end, bool skip_start,
                     const PassContext* ctx) const {
        const std::size_t m = hierarchy_.coarsen(state.level);
        for (std::size_t c = begin; c < end; c += m) {
            if (skip_start && c == 0) continue;
            relax_interval(state, c, ctx);
        }
    }

    const Application& app() const { return app_; }

private:
    template <class F>
    StateVector guarded(std::size_t level, std::size_t n, F&& f) const {
        StateVector out;
        try {
            out = f();
        } catch (const StepError& e) {
            if (e.time_index()) throw;
            throw StepError(e.message(), hierarchy_.fine_index(level, n));
        }
        if (!out.all_finite()) {
            throw StepError("step produced a non-finite state", hierarchy_.fine_index(level, n));
        }
        return out;
    }

    StateVector phi_unguarded(std::size_t level, const StateVector& u, std::size_t n) const {
        if (level == 0 || config_.coarse_operator == CoarseOperator::rediscretized) {
            return app_.step(u, hierarchy_.time(level, n - 1), hierarchy_.time(level, n), level);
        }
        const std::size_t first = hierarchy_.fine_index(level, n - 1);
        const std::size_t last = hierarchy_.fine_index(level, n);
        StateVector v = u;
        for (std::size_t f = first; f < last; ++f) {
            v = app_.step(v, hierarchy_.fine_time(f), hierarchy_.fine_time(f + 1), 0);
        }
        return v;
    }

    const Application& app_;
    const Hierarchy& hierarchy_;
    const SolverConfig& config_;
    PeriodicController* controller_ = nullptr;
};

void require_relaxable(const Hierarchy& hierarchy, const SpaceTimeState& state) {
    if (state.level >= hierarchy.coarsest()) {
        throw ArgumentError("relaxation needs a coarser level below level " + std::to_string(state.level));
    }
    if (state.num_points() != hierarchy.level(state.level).num_points) {
        throw ArgumentError("state size does not match level " + std::to_string(state.level));
    }
}

}  // namespace

void sequential_solve(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
                      std::size_t from, std::size_t to, const SolverConfig& config) {
    if (from >= to || to >= state.num_points()) {
        throw ArgumentError("sequential_solve: need from < to < num_points");
    }
    Stepper stepper(app, hierarchy, config);
    for (std::size_t n = from + 1; n <= to; ++n) {
        state.values[n] = stepper.step(state, n, nullptr);
    }
}

void f_relax(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
             const SolverConfig& config) {
    require_relaxable(hierarchy, state);
    Stepper(app, hierarchy, config).relax_range(state, 0, state.num_points(), false, nullptr);
}

void c_relax(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
             const SolverConfig& config) {
    require_relaxable(hierarchy, state);
    Stepper stepper(app, hierarchy, config);
    const std::size_t m = hierarchy.coarsen(state.level);
    for (std::size_t c = m; c < state.num_points(); c += m) {
        state.values[c] = stepper.step(state, c, nullptr);
    }
}

void fcf_relax(const Application& app, const Hierarchy& hierarchy, SpaceTimeState& state,
               const SolverConfig& config) {
    f_relax(app, hierarchy, state, config);
    c_relax(app, hierarchy, state, config);
    f_relax(app, hierarchy, state, config);
}

std::vector<CPointResidual> compute_residual(const Application& app, const Hierarchy& hierarchy,
                                             const SpaceTimeState& state, const SolverConfig& config) {
    require_relaxable(hierarchy, state);
    Stepper stepper(app, hierarchy, config);
    // The stepper never writes through the state when no pass context is given.
    auto& s = const_cast<SpaceTimeState&>(state);
    const std::size_t m = hierarchy.coarsen(state.level);
    std::vector<CPointResidual> out;
    out.push_back({0, app.zero()});
    for (std::size_t c = m; c < state.num_points(); c += m) {
        out.push_back({c, stepper.residual(s, c, nullptr)});
    }
    return out;
}

void fas_restrict(const Application& app, const Hierarchy& hierarchy, const SpaceTimeState& fine,
                  const std::vector<CPointResidual>& fine_residuals, SpaceTimeState& coarse,
                  const SolverConfig& config) {
    if (coarse.level != fine.level + 1 || coarse.level > hierarchy.coarsest()) {
        throw ArgumentError("fas_restrict: coarse state must live on the next level");
    }
    const std::size_t nc = hierarchy.level(coarse.level).num_points;
    const std::size_t m = hierarchy.coarsen(fine.level);
    if (coarse.num_points() != nc || fine.num_points() != hierarchy.level(fine.level).num_points) {
        throw ArgumentError("fas_restrict: state sizes do not match the hierarchy");
    }
    std::vector<const StateVector*> residual_at(fine.num_points(), nullptr);
    for (const auto& r : fine_residuals) {
        if (r.index >= fine.num_points()) throw ArgumentError("fas_restrict: residual index out of range");
        residual_at[r.index] = &r.residual;
    }
    coarse.fas_rhs.assign(nc, app.zero());
    coarse.restricted_guess.assign(nc, app.zero());
    Stepper stepper(app, hierarchy, config);
    for (std::size_t k = 0; k < nc; ++k) {
        coarse.values[k] = fine.values[k * m];
        coarse.restricted_guess[k] = coarse.values[k];
        if (k == 0) continue;
        if (!residual_at[k * m]) {
            throw ArgumentError("fas_restrict: missing residual at C-point " + std::to_string(k * m));
        }
        coarse.fas_rhs[k] =
            stepper.tau(coarse.level, *residual_at[k * m], coarse.values[k], coarse.values[k - 1], k);
    }
}

void interpolate_and_correct(const Application& app, const Hierarchy& hierarchy,
                             const SpaceTimeState& coarse, SpaceTimeState& fine,
                             const SolverConfig& config) {
    if (coarse.level != fine.level + 1 || coarse.restricted_guess.size() != coarse.num_points()) {
        throw ArgumentError("interpolate_and_correct: coarse state lacks restricted data");
    }
    Stepper stepper(app, hierarchy, config);
    const std::size_t m = hierarchy.coarsen(fine.level);
    for (std::size_t k = 0; k < coarse.num_points(); ++k) {
        fine.values[k * m] = stepper.corrected(fine.values[k * m], coarse.values[k], coarse.restricted_guess[k]);
    }
    f_relax(app, hierarchy, fine, config);
}

void vcycle(const Application& app, const Hierarchy& hierarchy, const SolverConfig& config,
            std::vector<SpaceTimeState>& states, std::size_t level) {
    if (level >= hierarchy.coarsest()) {
        throw ArgumentError("vcycle must start above the coarsest level");
    }
    auto& fine = states.at(level);
    if (config.relaxation == Relaxation::F) {
        f_relax(app, hierarchy, fine, config);
    } else {
        fcf_relax(app, hierarchy, fine, config);
    }
    const auto residuals = compute_residual(app, hierarchy, fine, config);
    auto& coarse = states.at(level + 1);
    fas_restrict(app, hierarchy, fine, residuals, coarse, config);
    if (level + 1 == hierarchy.coarsest()) {
        sequential_solve(app, hierarchy, coarse, 0, coarse.num_points() - 1, config);
    } else {
        vcycle(app, hierarchy, config, states, level + 1);
    }
    interpolate_and_correct(app, hierarchy, coarse, fine, config);
}

SolveResult solve(const Application& app, const Hierarchy& hierarchy, const SolverConfig& config) {
    return run_single_worker(app, hierarchy, config, nullptr);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

class Worker {
public:
    Worker(const Application& app, const Hierarchy& hierarchy, const SolverConfig& config,
           const PeriodicConfig* periodic, const WorkerSetup& setup)
        : app_(app),
          hierarchy_(hierarchy),
          config_(config),
          setup_(setup),
          rank_(setup.rank),
          workers_(setup.ownership->num_workers),
          stepper_(app, hierarchy, config_) {
        for (std::size_t l = 0; l < hierarchy_.num_levels(); ++l) {
            blocks_.push_back(setup.ownership->level_block(rank_, hierarchy_.cumulative_coarsen(l)));
            states_.push_back(initialize_state(app_, hierarchy_, l, InitMode::from_init));
            residuals_.emplace_back(hierarchy_.level(l).num_points);
        }
        initial_ = states_[0].values[0];
        if (workers_ > 1 && !setup.transport) {
            throw ArgumentError("multi-worker run without a transport");
        }
        if (periodic && periodic->enabled) {
            if (!setup.mailbox) throw ArgumentError("periodic run without an update mailbox");
            controller_ = std::make_unique<PeriodicController>(
                *periodic, config_.relaxation, hierarchy_.period(), *setup.mailbox, rank_ == 0,
                rank_ + 1 == workers_, initial_, setup.watchdog);
            stepper_.set_controller(controller_.get());
        }
    }

    WorkerOutput run() {
        start_ = Clock::now();
        const std::size_t levels = hierarchy_.num_levels();

        // Iteration 0: initial guess.
        if (config_.skip_first_down) {
            timed(report_.timings.coarse, [&] {
                if (levels == 1) {
                    coarse_solve_pass(0, 0);
                } else {
                    for (std::size_t l = 1; l < levels; ++l) states_[l].values[0] = states_[0].values[0];
                    coarse_solve_pass(levels - 1, 0);
                    for (std::size_t l = levels - 1; l-- > 0;) interpolate_pass(l, 0, true);
                }
            });
        } else if (levels > 1) {
            timed(report_.timings.relax, [&] { f_relax_pass(0, 0, false); });
        }
        timed(report_.timings.residual, [&] { residual_pass(0, 0, std::nullopt); });

        for (std::size_t it = 0;; ++it) {
            if (it > 0) {
                std::optional<PassContext> deferred;
                if (levels > 1) {
                    const bool split = controller_ && config_.relaxation == Relaxation::F && it == 1;
                    timed(report_.timings.relax, [&] {
                        const PassContext fctx = relax(0, it, split);
                        if (split && blocks_[0].begin == 0) deferred = fctx;
                    });
                }
                timed(report_.timings.residual, [&] { residual_pass(0, it, deferred); });
            }
            if (vote(it)) break;
            if (it > 0) correct(it);
        }

        WorkerOutput out;
        const Block& b = blocks_[0];
        out.owned.assign(states_[0].values.begin() + static_cast<std::ptrdiff_t>(b.begin),
                         states_[0].values.begin() + static_cast<std::ptrdiff_t>(b.end));
        report_.iterations = report_.residual_history.size() - 1;
        out.report = std::move(report_);
        return out;
    }

private:
    template <class F>
    void timed(double& slot, F&& f) {
        const auto t0 = Clock::now();
        f();
        slot += seconds_since(t0);
    }

    PassContext begin(PassKind kind, std::size_t level, std::size_t iteration) {
        PassContext ctx{next_pass_++, kind, level, iteration};
        if (controller_) controller_->begin_pass(ctx);
        return ctx;
    }

    std::size_t coarsen(std::size_t level) const { return hierarchy_.coarsen(level); }

    void send_right(const PassContext& ctx, std::size_t index, const StateVector& value) {
        if (rank_ + 1 >= workers_) return;
        BoundaryMessage msg;
        msg.kind = BoundaryMessage::Kind::left_value;
        msg.pass = ctx.pass;
        msg.time_index = index;
        msg.payload = value;
        setup_.transport->send(rank_, rank_ + 1, std::move(msg));
    }

    StateVector receive_left(const PassContext& ctx, std::size_t index) {
        const auto t0 = Clock::now();
        BoundaryMessage msg =
            setup_.transport->receive(rank_ - 1, rank_, BoundaryMessage::Kind::left_value, ctx.pass, ctx);
        report_.timings.comm += seconds_since(t0);
        if (msg.time_index != index) {
            throw ProtocolError("worker " + std::to_string(rank_) + " expected left_value for index " +
                                std::to_string(index) + " in pass " + std::to_string(ctx.pass) +
                                ", got index " + std::to_string(msg.time_index));
        }
        return std::move(msg.payload);
    }

    PassContext f_relax_pass(std::size_t level, std::size_t it, bool skip_start) {
        const PassContext ctx = begin(PassKind::f_relax, level, it);
        const Block& b = blocks_[level];
        stepper_.relax_range(states_[level], b.begin, b.end, skip_start, &ctx);
        return ctx;
    }

    void c_relax_pass(std::size_t level, std::size_t it) {
        const PassContext ctx = begin(PassKind::c_relax, level, it);
        auto& st = states_[level];
        const Block& b = blocks_[level];
        const std::size_t m = coarsen(level);
        for (std::size_t c = b.begin + m; c < b.end; c += m) {
            st.values[c] = stepper_.step(st, c, &ctx);
        }
        send_right(ctx, b.end - 1, st.values[b.end - 1]);
        if (b.begin > 0) {
            st.values[b.begin - 1] = receive_left(ctx, b.begin - 1);
            st.values[b.begin] = stepper_.step(st, b.begin, &ctx);
        }
    }

    PassContext relax(std::size_t level, std::size_t it, bool split) {
        const PassContext first = f_relax_pass(level, it, split);
        if (config_.relaxation == Relaxation::FCF) {
            c_relax_pass(level, it);
            f_relax_pass(level, it, false);
        }
        return first;
    }

    /// With `deferred`, the interval starting at t = 0 was skipped by the
    /// preceding F-relaxation; it is relaxed here after every local step
    /// ending at T, and before the boundary value leaves this worker.
    void residual_pass(std::size_t level, std::size_t it, std::optional<PassContext> deferred) {
        const PassContext ctx = begin(PassKind::residual, level, it);
        auto& st = states_[level];
        auto& res = residuals_[level];
        const Block& b = blocks_[level];
        const std::size_t m = coarsen(level);
        if (b.begin == 0) res[0] = app_.zero();
        for (std::size_t c = b.begin + m; c < b.end; c += m) {
            if (deferred && c == m) continue;
            res[c] = stepper_.residual(st, c, &ctx);
        }
        if (deferred) {
            stepper_.relax_interval(st, 0, &*deferred);
            if (m < b.end) res[m] = stepper_.residual(st, m, &ctx);
        }
        send_right(ctx, b.end - 1, st.values[b.end - 1]);
        if (b.begin > 0) {
            st.values[b.begin - 1] = receive_left(ctx, b.begin - 1);
            res[b.begin] = stepper_.residual(st, b.begin, &ctx);
        }
    }

    void restrict_pass(std::size_t level, std::size_t it) {
        const PassContext ctx = begin(PassKind::restrict, level, it);
        const auto& fine = states_[level];
        const auto& res = residuals_[level];
        auto& coarse = states_[level + 1];
        const Block& cb = blocks_[level + 1];
        const std::size_t m = coarsen(level);
        for (std::size_t k = cb.begin; k < cb.end; ++k) {
            coarse.values[k] = fine.values[k * m];
            coarse.restricted_guess[k] = coarse.values[k];
        }
        if (cb.begin == 0) coarse.fas_rhs[0] = app_.zero();
        for (std::size_t k = std::max<std::size_t>(cb.begin, 1); k < cb.end; ++k) {
            if (k == cb.begin) continue;
            coarse.fas_rhs[k] = stepper_.tau(level + 1, res[k * m], coarse.values[k], coarse.values[k - 1], k);
        }
        send_right(ctx, cb.end - 1, coarse.values[cb.end - 1]);
        if (cb.begin > 0) {
            coarse.values[cb.begin - 1] = receive_left(ctx, cb.begin - 1);
            const std::size_t k = cb.begin;
            coarse.fas_rhs[k] = stepper_.tau(level + 1, res[k * m], coarse.values[k], coarse.values[k - 1], k);
        }
    }

    void coarse_solve_pass(std::size_t level, std::size_t it) {
        const PassContext ctx = begin(PassKind::coarse_solve, level, it);
        auto& st = states_[level];
        const Block& b = blocks_[level];
        if (b.begin > 0) st.values[b.begin - 1] = receive_left(ctx, b.begin - 1);
        for (std::size_t n = std::max<std::size_t>(b.begin, 1); n < b.end; ++n) {
            st.values[n] = stepper_.step(st, n, &ctx);
        }
        send_right(ctx, b.end - 1, st.values[b.end - 1]);
    }

    /// Coarse level + 1 into `level`. Seeding copies the coarse values onto
    /// the C-points instead of correcting them.
    void interpolate_pass(std::size_t level, std::size_t it, bool seed) {
        const PassContext ctx = begin(seed ? PassKind::seed : PassKind::interpolate, level, it);
        auto& fine = states_[level];
        const auto& coarse = states_[level + 1];
        const Block& cb = blocks_[level + 1];
        const std::size_t m = coarsen(level);
        for (std::size_t k = cb.begin; k < cb.end; ++k) {
            fine.values[k * m] = seed ? coarse.values[k]
                                      : stepper_.corrected(fine.values[k * m], coarse.values[k],
                                                           coarse.restricted_guess[k]);
        }
        const Block& b = blocks_[level];
        stepper_.relax_range(fine, b.begin, b.end, false, &ctx);
    }

    void correct(std::size_t it) {
        const std::size_t levels = hierarchy_.num_levels();
        if (levels == 1) {
            timed(report_.timings.coarse, [&] { coarse_solve_pass(0, it); });
            return;
        }
        timed(report_.timings.coarse, [&] {
            restrict_pass(0, it);
            for (std::size_t l = 1; l + 1 < levels; ++l) {
                relax(l, it, false);
                residual_pass(l, it, std::nullopt);
                restrict_pass(l, it);
            }
            coarse_solve_pass(levels - 1, it);
            for (std::size_t l = levels - 1; l-- > 1;) interpolate_pass(l, it, false);
        });
        timed(report_.timings.relax, [&] { interpolate_pass(0, it, false); });
    }

    VotePartial local_vote() const {
        VotePartial mine;
        const Block& b = blocks_[0];
        const std::size_t m = hierarchy_.num_levels() > 1 ? coarsen(0) : 1;
        for (std::size_t c = b.begin; c < b.end; c += m) {
            mine.residuals.push_back({c, app_.spatial_norm(residuals_[0][c])});
        }
        if (rank_ + 1 == workers_) {
            const auto& st = states_[0];
            if (controller_) {
                mine.jump = controller_->last_jump();
                mine.ic_converged = controller_->ic_converged();
                mine.ic_converged_iteration = controller_->status().converged_iteration;
            } else {
                mine.jump = jump_norm(app_, st.values.back(), initial_);
            }
        }
        return mine;
    }

    std::vector<VotePartial> allgather(BoundaryMessage::Kind kind, std::size_t it, VotePartial mine) {
        std::vector<VotePartial> all(workers_);
        if (workers_ == 1) {
            all[0] = std::move(mine);
            return all;
        }
        const auto t0 = Clock::now();
        for (std::size_t w = 0; w < workers_; ++w) {
            if (w == rank_) continue;
            BoundaryMessage msg;
            msg.kind = kind;
            msg.pass = it;
            msg.vote = mine;
            setup_.transport->send(rank_, w, std::move(msg));
        }
        const PassContext ctx{next_pass_, PassKind::residual, 0, it};
        for (std::size_t w = 0; w < workers_; ++w) {
            if (w == rank_) {
                all[w] = mine;
                continue;
            }
            all[w] = setup_.transport->receive(w, rank_, kind, it, ctx).vote;
        }
        report_.timings.comm += seconds_since(t0);
        return all;
    }

    bool vote(std::size_t it) {
        // Every worker sees the same partials and reaches the same decision.
        const auto all = allgather(BoundaryMessage::Kind::residual_partial, it, local_vote());
        std::vector<PointResidual> points;
        double sum = 0.0;
        for (const auto& p : all) {
            for (const auto& r : p.residuals) {
                sum += r.norm * r.norm;
                points.push_back(r);
            }
        }
        const VotePartial& last = all.back();
        const double aggregate = std::sqrt(sum);
        report_.residual_history.push_back(aggregate);
        report_.pointwise_residuals.push_back(std::move(points));
        report_.jump_history.push_back(last.jump.value_or(0.0));
        report_.wall_clock.push_back(seconds_since(start_));
        if (last.ic_converged_iteration) report_.ic_converged_iteration = last.ic_converged_iteration;

        const auto& history = report_.residual_history;
        const double threshold = config_.tol_mode == ToleranceMode::relative
                                     ? config_.residual_tol * history[std::min<std::size_t>(1, it)]
                                     : config_.residual_tol;
        const bool residual_ok = aggregate < threshold;
        bool halt = false;
        if (controller_) {
            if (last.ic_converged && residual_ok) {
                halt = true;
                report_.converged_reason = ConvergedReason::ic_tol;
            }
        } else if (residual_ok) {
            halt = true;
            report_.converged_reason = ConvergedReason::residual_tol;
        }
        if (!halt && it >= config_.max_iterations) {
            halt = true;
            report_.converged_reason = ConvergedReason::max_iter;
        }
        if (halt) {
            // Shutdown barrier: nobody leaves before every worker has voted.
            allgather(BoundaryMessage::Kind::halt_vote, it, {});
        }
        return halt;
    }

    const Application& app_;
    const Hierarchy& hierarchy_;
    SolverConfig config_;
    WorkerSetup setup_;
    std::size_t rank_;
    std::size_t workers_;
    Stepper stepper_;
    std::vector<Block> blocks_;
    std::vector<SpaceTimeState> states_;
    std::vector<std::vector<StateVector>> residuals_;
    StateVector initial_;
    std::unique_ptr<PeriodicController> controller_;
    std::uint64_t next_pass_ = 0;
    RunReport report_;
    Clock::time_point start_;
};

}  // namespace

WorkerOutput run_worker(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                        const PeriodicConfig* periodic, const WorkerSetup& setup) {
    solver.validate();
    if (periodic) periodic->validate();
    if (!setup.ownership || setup.rank >= setup.ownership->num_workers) {
        throw ArgumentError("worker rank outside the ownership map");
    }
    Worker worker(app, hierarchy, solver, periodic, setup);
    return worker.run();
}

SpaceTimeState assemble_state(const Hierarchy& hierarchy, std::vector<WorkerOutput>& outputs) {
    SpaceTimeState state;
    state.level = 0;
    state.values.reserve(hierarchy.fine_points());
    for (auto& out : outputs) {
        for (auto& v : out.owned) state.values.push_back(std::move(v));
    }
    if (state.values.size() != hierarchy.fine_points()) {
        throw ProtocolError("assembled state has " + std::to_string(state.values.size()) + " points, expected " +
                            std::to_string(hierarchy.fine_points()));
    }
    return state;
}

SolveResult run_single_worker(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                              const PeriodicConfig* periodic) {
    const OwnershipMap map =
        partition(hierarchy.fine_points(), 1, hierarchy.cumulative_coarsen(hierarchy.coarsest()));
    UpdateMailbox mailbox(periodic && periodic->strict_fifo);
    WorkerSetup setup;
    setup.ownership = &map;
    setup.mailbox = &mailbox;
    std::vector<WorkerOutput> outputs;
    outputs.push_back(run_worker(app, hierarchy, solver, periodic, setup));
    RunReport report = std::move(outputs.front().report);
    if (periodic && periodic->enabled) {
        report.ic_deposits = mailbox.generation();
        report.ic_consumed = mailbox.consumed();
        report.ic_stale = mailbox.stale();
    }
    return {assemble_state(hierarchy, outputs), std::move(report)};
}

}  // namespace tpmgrit
