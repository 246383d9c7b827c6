#include "tpmgrit/periodic.hpp"

#include "tpmgrit/errors.hpp"
#include "tpmgrit/mgrit.hpp"
#include "tpmgrit/worker.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tpmgrit {

void PeriodicConfig::validate() const {
    if (!(ic_tolerance >= 0.0)) {
        throw ConfigError("ic_tolerance must be non-negative");
    }
}

std::string_view to_string(MailboxEvent::Kind kind) {
    switch (kind) {
        case MailboxEvent::Kind::deposit: return "deposit";
        case MailboxEvent::Kind::receive: return "receive";
        case MailboxEvent::Kind::reread: return "reread";
        case MailboxEvent::Kind::discard: return "discard";
    }
    return "unknown";
}

namespace {

std::string describe(const PassContext& ctx) {
    return "pass " + std::to_string(ctx.pass) + " (" + std::string(to_string(ctx.kind)) + ", level " +
           std::to_string(ctx.level) + ", iteration " + std::to_string(ctx.iteration) + ")";
}

std::string describe(ReadRule rule, std::optional<std::uint64_t> source) {
    std::string s = rule == ReadRule::through ? "update through pass " : "first update after pass ";
    return s + (source ? std::to_string(*source) : std::string("<none>"));
}

}  // namespace

void UpdateMailbox::deposit(std::uint64_t pass, std::size_t iteration, StateVector u_final,
                            bool converged) {
    {
        std::lock_guard lock(mutex_);
        if (converged_) {
            throw ProtocolError("ic_update deposited in pass " + std::to_string(pass) +
                                " after the initial condition converged");
        }
        if (!deposits_.empty() && deposits_.back().pass >= pass) {
            throw ProtocolError("ic_update deposits out of pass order at pass " + std::to_string(pass));
        }
        deposits_.push_back({pass, iteration, std::move(u_final), converged, false});
        audit_.push_back({MailboxEvent::Kind::deposit, iteration, pass, deposits_.size()});
        converged_ = converged;
    }
    cv_.notify_all();
}

bool UpdateMailbox::ready_locked(ReadRule rule, std::optional<std::uint64_t> source) const {
    if (converged_) {
        return true;
    }
    if (deposits_.empty()) {
        return false;
    }
    if (rule == ReadRule::through) {
        return deposits_.back().pass >= *source;
    }
    return !source || deposits_.back().pass > *source;
}

UpdateMailbox::Selection UpdateMailbox::select_locked(ReadRule rule,
                                                      std::optional<std::uint64_t> source,
                                                      std::size_t cursor) const {
    if (rule == ReadRule::after) {
        auto it = std::find_if(deposits_.begin(), deposits_.end(),
                               [&](const Deposit& d) { return !source || d.pass > *source; });
        if (it == deposits_.end() || it->converged) {
            return {true, 0};
        }
        return {false, static_cast<std::size_t>(it - deposits_.begin())};
    }

    if (converged_ && deposits_.back().pass <= *source) {
        return {true, 0};
    }
    if (strict_fifo_) {
        if (cursor >= deposits_.size() || deposits_[cursor].pass > *source) {
            throw ProtocolError("strict FIFO receive found no unread ic_update through pass " +
                                std::to_string(*source));
        }
        return {false, cursor};
    }
    for (std::size_t i = deposits_.size(); i-- > 0;) {
        if (deposits_[i].pass <= *source) {
            return {false, i};
        }
    }
    throw ProtocolError("no ic_update was deposited through pass " + std::to_string(*source));
}

std::optional<StateVector> UpdateMailbox::receive(ReadRule rule, std::optional<std::uint64_t> source,
                                                  const PassContext& ctx,
                                                  std::chrono::milliseconds watchdog) {
    if (rule == ReadRule::through && !source) {
        rule = ReadRule::after;
    }
    std::unique_lock lock(mutex_);
    const bool ok =
        cv_.wait_for(lock, watchdog, [&] { return closed_ || ready_locked(rule, source); });
    if (closed_) {
        throw ProtocolError("mailbox closed while worker 0 awaited ic_update in " + describe(ctx));
    }
    if (!ok) {
        throw ProtocolError("watchdog: worker 0 blocked in " + describe(ctx) + " awaiting ic_update (" +
                            describe(rule, source) + ")");
    }
    const Selection sel = select_locked(rule, source, cursor_);
    if (sel.converged) {
        return std::nullopt;
    }
    for (std::size_t i = cursor_; i < sel.index; ++i) {
        if (!deposits_[i].read) {
            audit_.push_back({MailboxEvent::Kind::discard, ctx.iteration, ctx.pass, i + 1});
        }
    }
    Deposit& d = deposits_[sel.index];
    if (d.read) {
        ++rereads_;
        audit_.push_back({MailboxEvent::Kind::reread, ctx.iteration, ctx.pass, sel.index + 1});
    } else {
        d.read = true;
        ++consumed_;
        audit_.push_back({MailboxEvent::Kind::receive, ctx.iteration, ctx.pass, sel.index + 1});
    }
    cursor_ = std::max(cursor_, sel.index + 1);
    return d.value;
}

std::optional<StateVector> UpdateMailbox::replay(ReadRule rule, std::optional<std::uint64_t> source,
                                                 std::size_t& cursor) const {
    if (rule == ReadRule::through && !source) {
        rule = ReadRule::after;
    }
    std::lock_guard lock(mutex_);
    if (!ready_locked(rule, source)) {
        throw ProtocolError("ic_update replay before the update was deposited (" +
                            describe(rule, source) + ")");
    }
    const Selection sel = select_locked(rule, source, cursor);
    if (sel.converged) {
        return std::nullopt;
    }
    cursor = std::max(cursor, sel.index + 1);
    return deposits_[sel.index].value;
}

void UpdateMailbox::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::size_t UpdateMailbox::generation() const {
    std::lock_guard lock(mutex_);
    return deposits_.size();
}

std::size_t UpdateMailbox::consumed() const {
    std::lock_guard lock(mutex_);
    return consumed_;
}

std::size_t UpdateMailbox::rereads() const {
    std::lock_guard lock(mutex_);
    return rereads_;
}

std::size_t UpdateMailbox::stale() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (std::size_t i = 0; i < cursor_ && i < deposits_.size(); ++i) {
        n += deposits_[i].read ? 0 : 1;
    }
    return n;
}

bool UpdateMailbox::converged() const {
    std::lock_guard lock(mutex_);
    return converged_;
}

std::vector<MailboxEvent> UpdateMailbox::audit() const {
    std::lock_guard lock(mutex_);
    return audit_;
}

PeriodicController::PeriodicController(const PeriodicConfig& config, Relaxation relaxation,
                                       double period, UpdateMailbox& mailbox, bool owns_start,
                                       bool owns_end, StateVector initial_condition,
                                       std::chrono::milliseconds watchdog)
    : config_(config),
      relaxation_(relaxation),
      period_(period),
      mailbox_(&mailbox),
      owns_start_(owns_start),
      owns_end_(owns_end),
      watchdog_(watchdog),
      ic_in_use_(std::move(initial_condition)),
      jump_reference_(ic_in_use_) {
    config_.validate();
}

bool PeriodicController::reads_initial(const PassContext& ctx) {
    if (ctx.level != 0 || ctx.iteration == 0) {
        return false;
    }
    return ctx.kind == PassKind::f_relax || ctx.kind == PassKind::interpolate ||
           ctx.kind == PassKind::coarse_solve;
}

bool PeriodicController::ends_at_final(const PassContext& ctx) {
    return ctx.level == 0 && (ctx.kind == PassKind::c_relax || ctx.kind == PassKind::residual ||
                              ctx.kind == PassKind::coarse_solve);
}

std::optional<std::uint64_t> PeriodicController::final_pass_before(std::uint64_t pass) const {
    for (auto it = final_passes_.rbegin(); it != final_passes_.rend(); ++it) {
        if (*it < pass) {
            return *it;
        }
    }
    return std::nullopt;
}

bool PeriodicController::evaluates_jump(const PassContext& ctx) {
    return ctx.level == 0 && (ctx.kind == PassKind::residual || ctx.kind == PassKind::coarse_solve);
}

ReadRule PeriodicController::rule_for(const PassContext& ctx) const {
    return discard_pass_ && *discard_pass_ == ctx.pass ? ReadRule::after : ReadRule::through;
}

void PeriodicController::begin_pass(const PassContext& ctx) {
    if (last_pass_ && ctx.pass <= *last_pass_) {
        return;
    }
    last_pass_ = ctx.pass;
    status_.iteration = ctx.iteration;
    if (!config_.enabled) {
        return;
    }
    if (ctx.level == 0 && ctx.kind == PassKind::restrict) {
        jump_reference_ = ic_in_use_;
        corrected_since_jump_ = true;
    }
    if (ends_at_final(ctx)) {
        final_passes_.push_back(ctx.pass);
    }
    if (!reads_initial(ctx)) {
        return;
    }
    if (relaxation_ == Relaxation::F && ctx.iteration == 1 && !discard_pass_) {
        discard_pass_ = ctx.pass;
    }
    if (owns_start_ || !owns_end_) {
        return;
    }
    const auto source = final_pass_before(ctx.pass);
    if (rule_for(ctx) == ReadRule::after) {
        discard_pending_ = !status_.ic_converged;
        discard_source_ = source;
        return;
    }
    if (auto v = mailbox_->replay(ReadRule::through, source, replay_cursor_)) {
        ic_in_use_ = std::move(*v);
    }
}

void PeriodicController::receive(const PassContext& ctx, StateVector& u) {
    if (!config_.enabled) {
        throw ProtocolError("ic_update receive in " + describe(ctx) +
                            " while the periodic extension is disabled (no producer)");
    }
    auto v = mailbox_->receive(rule_for(ctx), final_pass_before(ctx.pass), ctx, watchdog_);
    if (v) {
        u = *v;
        ic_in_use_ = std::move(*v);
    }
}

void PeriodicController::finish_cycle(const Application& app, const StateVector& u_final,
                                      const PassContext& ctx) {
    // A sequential sweep over the whole fine grid starts from the u(0) it
    // just read.
    if (ctx.kind == PassKind::coarse_solve) {
        jump_reference_ = ic_in_use_;
        corrected_since_jump_ = true;
    }
    if (status_.ic_converged) {
        last_jump_ = jump_norm(app, u_final, jump_reference_);
        return;
    }
    if (evaluates_jump(ctx) && corrected_since_jump_) {
        const double jump = jump_norm(app, u_final, jump_reference_);
        corrected_since_jump_ = false;
        last_jump_ = jump;
        status_.jump_history.push_back(jump);
        if (jump < config_.ic_tolerance) {
            status_.ic_converged = true;
            status_.converged_iteration = ctx.iteration;
        }
    }
    mailbox_->deposit(ctx.pass, ctx.iteration, u_final, status_.ic_converged);
    if (discard_pending_) {
        discard_pending_ = false;
        if (auto v = mailbox_->replay(ReadRule::after, discard_source_, replay_cursor_)) {
            ic_in_use_ = std::move(*v);
        }
    }
}

StateVector PeriodicController::fine_step(const Application& app, StateVector& u, double t_start,
                                          double t_stop, const PassContext& ctx) {
    begin_pass(ctx);
    const bool periodic = config_.enabled && ctx.level == 0;
    if (periodic && owns_start_ && t_start == 0.0 && ctx.iteration > 0) {
        receive(ctx, u);
    }
    StateVector out = app.step(u, t_start, t_stop, 0);
    if (periodic && owns_end_ && t_stop == period_) {
        finish_cycle(app, out, ctx);
    }
    return out;
}

double jump_norm(const Application& app, const StateVector& u_final, const StateVector& u_initial) {
    if (u_final.size() != u_initial.size()) {
        throw ArgumentError("jump_norm: dimension mismatch");
    }
    return app.spatial_norm(app.linear_combine(1.0, u_final, -1.0, u_initial));
}

SolveResult solve_periodic(const Application& app, const Hierarchy& hierarchy,
                           const SolverConfig& solver_config, const PeriodicConfig& periodic_config) {
    if (!periodic_config.enabled) {
        throw ConfigError("solve_periodic requires the periodic extension to be enabled");
    }
    return run_single_worker(app, hierarchy, solver_config, &periodic_config);
}

}  // namespace tpmgrit
