#pragma once

#include "tpmgrit/app.hpp"
#include "tpmgrit/pass.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

namespace tpmgrit {

struct SolverConfig;
struct SolveResult;

struct PeriodicConfig {
    double ic_tolerance = 1e-10;
    bool enabled = true;
    /// Debug mode: a receive consumes the oldest unread update instead of the
    /// freshest one and fails when no unread update exists.
    bool strict_fifo = false;

    void validate() const;
};

struct MailboxEvent {
    enum class Kind { deposit, receive, reread, discard };
    Kind kind = Kind::deposit;
    std::size_t iteration = 0;
    std::uint64_t pass = 0;
    std::size_t generation = 0;  ///< 1-based generation of the update involved
};

std::string_view to_string(MailboxEvent::Kind kind);

/// How a receive picks its update.
enum class ReadRule {
    through,  ///< freshest update deposited in a pass at or before the source pass
    after,    ///< first update deposited after the source pass
};

/// Carries u(T) from the owner of the final time point to the owner of t = 0.
///
/// Deposits never block. A receive names a source pass and picks its update
/// with a ReadRule, so the value read is fixed by the sweep schedule and not by
/// thread timing. It blocks only until the update it needs has been published.
class UpdateMailbox {
public:
    explicit UpdateMailbox(bool strict_fifo = false) : strict_fifo_(strict_fifo) {}

    UpdateMailbox(const UpdateMailbox&) = delete;
    UpdateMailbox& operator=(const UpdateMailbox&) = delete;

    /// `converged` marks the initial condition as converged from this update on;
    /// nothing may be deposited afterwards.
    void deposit(std::uint64_t pass, std::size_t iteration, StateVector u_final, bool converged);

    /// Empty when the initial condition had converged (no update to read).
    std::optional<StateVector> receive(ReadRule rule, std::optional<std::uint64_t> source,
                                       const PassContext& ctx, std::chrono::milliseconds watchdog);

    /// Non-blocking replay of a receive with a caller-held FIFO cursor. Used by
    /// the owner of T to track which u(0) the owner of t = 0 is using.
    std::optional<StateVector> replay(ReadRule rule, std::optional<std::uint64_t> source,
                                      std::size_t& cursor) const;

    /// Wakes all waiters with a ProtocolError.
    void close();

    std::size_t generation() const;
    std::size_t consumed() const;
    std::size_t rereads() const;
    /// Updates that were superseded before anyone read them.
    std::size_t stale() const;
    bool converged() const;
    std::vector<MailboxEvent> audit() const;

private:
    struct Deposit {
        std::uint64_t pass = 0;
        std::size_t iteration = 0;
        StateVector value;
        bool converged = false;
        bool read = false;
    };

    struct Selection {
        bool converged = false;
        std::size_t index = 0;
    };

    bool ready_locked(ReadRule rule, std::optional<std::uint64_t> source) const;
    Selection select_locked(ReadRule rule, std::optional<std::uint64_t> source,
                            std::size_t cursor) const;

    bool strict_fifo_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<Deposit> deposits_;
    std::vector<MailboxEvent> audit_;
    std::size_t cursor_ = 0;
    std::size_t consumed_ = 0;
    std::size_t rereads_ = 0;
    bool converged_ = false;
    bool closed_ = false;
};

struct PeriodicStatus {
    bool ic_converged = false;
    std::vector<double> jump_history;  ///< one entry per jump evaluation
    std::size_t iteration = 0;
    std::optional<std::size_t> converged_iteration;
};

/// Per-worker view of the time-periodic fine-grid step.
///
/// The owner of t = 0 receives initial-condition updates; the owner of T
/// evaluates the jump, flags convergence and deposits u(T). When these are
/// different workers the owner of T replays every receive, so it always knows
/// which u(0) the jump must be measured against.
///
/// Receives happen at the t = 0 step of level-0 sweeps from iteration 1 on
/// and read the update of the latest completed sweep that ends at T. The first
/// receive of iteration 1 under F-relaxation instead waits for the next update
/// (the first one is discarded). Every step to T deposits. The jump is tested
/// on the residual sweep, once per fine-level correction.
class PeriodicController {
public:
    PeriodicController(const PeriodicConfig& config, Relaxation relaxation, double period,
                       UpdateMailbox& mailbox, bool owns_start, bool owns_end,
                       StateVector initial_condition,
                       std::chrono::milliseconds watchdog = std::chrono::seconds(60));

    /// Every worker calls this at the start of every pass.
    void begin_pass(const PassContext& ctx);

    /// One fine-grid step. A step starting at t = 0 may first replace u by a
    /// received update; a step ending at T evaluates the jump and deposits.
    StateVector fine_step(const Application& app, StateVector& u, double t_start, double t_stop,
                          const PassContext& ctx);

    bool ic_converged() const noexcept { return status_.ic_converged; }
    const StateVector& ic_in_use() const noexcept { return ic_in_use_; }
    /// The u(0) the next jump is measured against: the value in use when the
    /// latest fine-level correction started, i.e. the start of the trajectory
    /// that currently reaches T.
    const StateVector& jump_reference() const noexcept { return jump_reference_; }
    const PeriodicStatus& status() const noexcept { return status_; }
    const PeriodicConfig& config() const noexcept { return config_; }
    /// Jump computed by the most recent step ending at T (deposited or not).
    std::optional<double> last_jump() const noexcept { return last_jump_; }

    /// Level-0 passes of iteration >= 1 whose sweep includes the t = 0 step.
    static bool reads_initial(const PassContext& ctx);
    /// Level-0 passes whose sweep includes the step ending at T.
    static bool ends_at_final(const PassContext& ctx);
    /// Level-0 passes whose step to T is checked against the tolerance.
    static bool evaluates_jump(const PassContext& ctx);

private:
    ReadRule rule_for(const PassContext& ctx) const;
    std::optional<std::uint64_t> final_pass_before(std::uint64_t pass) const;
    void receive(const PassContext& ctx, StateVector& u);
    void finish_cycle(const Application& app, const StateVector& u_final, const PassContext& ctx);

    PeriodicConfig config_;
    Relaxation relaxation_;
    double period_;
    UpdateMailbox* mailbox_;
    bool owns_start_;
    bool owns_end_;
    std::chrono::milliseconds watchdog_;

    StateVector ic_in_use_;
    StateVector jump_reference_;
    /// A sweep to T only says something new about u(0) after a correction.
    bool corrected_since_jump_ = true;
    PeriodicStatus status_;
    std::optional<double> last_jump_;
    std::optional<std::uint64_t> last_pass_;
    std::vector<std::uint64_t> final_passes_;
    std::optional<std::uint64_t> discard_pass_;
    std::size_t replay_cursor_ = 0;
    /// A replayed discard receive resolves at the next deposit.
    bool discard_pending_ = false;
    std::optional<std::uint64_t> discard_source_;
};

/// |u_T - u_0| in the application's spatial norm.
double jump_norm(const Application& app, const StateVector& u_final, const StateVector& u_initial);

/// Time-periodic MGRIT. Identical to solve() except that every fine-grid
/// step goes through the periodic step. Halts once the initial condition has
/// converged and the residual is below tolerance.
SolveResult solve_periodic(const Application& app, const Hierarchy& hierarchy,
                           const SolverConfig& solver_config, const PeriodicConfig& periodic_config);

}  // namespace tpmgrit
