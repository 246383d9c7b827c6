#include "tpmgrit/exec.hpp"

#include "tpmgrit/errors.hpp"

#include <algorithm>
#include <exception>
#include <string>
#include <thread>

namespace tpmgrit {

std::string_view to_string(ExecutionMode mode) {
    return mode == ExecutionMode::serial ? "serial" : "threaded";
}

void ExecutorConfig::validate() const {
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (mode == ExecutionMode::serial && workers != 1) {
        throw ConfigError("serial execution uses exactly one worker");
    }
    if (watchdog.count() <= 0) throw ConfigError("watchdog must be positive");
}

void Channel::push(BoundaryMessage message) {
    {
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(message));
    }
    cv_.notify_one();
}

std::optional<BoundaryMessage> Channel::pop(std::chrono::milliseconds watchdog) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, watchdog, [&] { return closed_ || !queue_.empty(); })) {
        return std::nullopt;
    }
    if (queue_.empty()) {
        throw ProtocolError("channel closed");
    }
    BoundaryMessage msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
}

void Channel::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Channel::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::size_t Channel::pending() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

ThreadedTransport::ThreadedTransport(std::size_t workers, std::chrono::milliseconds watchdog)
    : workers_(workers), watchdog_(watchdog) {
    channels_.reserve(workers * workers);
    for (std::size_t i = 0; i < workers * workers; ++i) {
        channels_.push_back(std::make_unique<Channel>());
    }
}

Channel& ThreadedTransport::channel(std::size_t from, std::size_t to) {
    if (from >= workers_ || to >= workers_ || from == to) {
        throw ProtocolError("no channel from worker " + std::to_string(from) + " to worker " +
                            std::to_string(to));
    }
    return *channels_[from * workers_ + to];
}

void ThreadedTransport::send(std::size_t from, std::size_t to, BoundaryMessage message) {
    channel(from, to).push(std::move(message));
}

BoundaryMessage ThreadedTransport::receive(std::size_t from, std::size_t to, BoundaryMessage::Kind kind,
                                           std::uint64_t pass, const PassContext& ctx) {
    const auto where = [&] {
        return "worker " + std::to_string(to) + " in pass " + std::to_string(ctx.pass) + " (" +
               std::string(to_string(ctx.kind)) + ", level " + std::to_string(ctx.level) +
               ", iteration " + std::to_string(ctx.iteration) + ")";
    };
    std::optional<BoundaryMessage> msg;
    try {
        msg = channel(from, to).pop(watchdog_);
    } catch (const ProtocolError&) {
        throw ProtocolError("run aborted while " + where() + " awaited " + std::string(to_string(kind)) +
                            " from worker " + std::to_string(from));
    }
    if (!msg) {
        throw ProtocolError("watchdog: " + where() + " blocked awaiting " + std::string(to_string(kind)) +
                            " " + std::to_string(pass) + " from worker " + std::to_string(from));
    }
    if (msg->kind != kind || msg->pass != pass) {
        throw ProtocolError(where() + " expected " + std::string(to_string(kind)) + " " +
                            std::to_string(pass) + " from worker " + std::to_string(from) + ", got " +
                            std::string(to_string(msg->kind)) + " " + std::to_string(msg->pass));
    }
    return std::move(*msg);
}

void ThreadedTransport::close_all() {
    for (auto& c : channels_) c->close();
}

std::size_t ThreadedTransport::undelivered() const {
    std::size_t n = 0;
    for (const auto& c : channels_) n += c->pending();
    return n;
}

namespace {

SolveResult run_threaded(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                         const PeriodicConfig* periodic, const ExecutorConfig& executor) {
    const std::size_t workers = executor.workers;
    const OwnershipMap map =
        partition(hierarchy.fine_points(), workers, hierarchy.cumulative_coarsen(hierarchy.coarsest()));
    ThreadedTransport transport(workers, executor.watchdog);
    UpdateMailbox mailbox(periodic && periodic->strict_fifo);

    std::vector<WorkerOutput> outputs(workers);
    std::vector<std::exception_ptr> errors(workers);
    std::mutex first_mutex;
    std::optional<std::size_t> first_failure;
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                WorkerSetup setup;
                setup.rank = w;
                setup.ownership = &map;
                setup.transport = &transport;
                setup.mailbox = &mailbox;
                setup.watchdog = executor.watchdog;
                try {
                    outputs[w] = run_worker(app, hierarchy, solver, periodic, setup);
                } catch (...) {
                    errors[w] = std::current_exception();
                    {
                        std::lock_guard lock(first_mutex);
                        if (!first_failure) first_failure = w;
                    }
                    transport.close_all();
                    mailbox.close();
                }
            });
        }
    }
    if (first_failure) {
        std::rethrow_exception(errors[*first_failure]);
    }
    if (const std::size_t left = transport.undelivered(); left != 0) {
        throw ProtocolError(std::to_string(left) + " boundary messages were never received");
    }

    RunReport report = outputs.front().report;
    for (const auto& out : outputs) {
        const auto& t = out.report.timings;
        report.timings.relax = std::max(report.timings.relax, t.relax);
        report.timings.residual = std::max(report.timings.residual, t.residual);
        report.timings.coarse = std::max(report.timings.coarse, t.coarse);
        report.timings.comm = std::max(report.timings.comm, t.comm);
    }
    if (periodic && periodic->enabled) {
        report.ic_deposits = mailbox.generation();
        report.ic_consumed = mailbox.consumed();
        report.ic_stale = mailbox.stale();
    }
    return {assemble_state(hierarchy, outputs), std::move(report)};
}

}  // namespace

SolveResult run(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                const PeriodicConfig* periodic, const ExecutorConfig& executor) {
    executor.validate();
    SolveResult result = executor.mode == ExecutionMode::serial
                             ? run_single_worker(app, hierarchy, solver, periodic)
                             : run_threaded(app, hierarchy, solver, periodic, executor);
    if (!executor.record_timings) {
        result.report.timings = {};
    }
    return result;
}

double best_of(std::size_t repeat, const std::function<void()>& fn) {
    double best = 0.0;
    for (std::size_t r = 0; r < std::max<std::size_t>(repeat, 1); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = r == 0 ? s : std::min(best, s);
    }
    return best;
}

Measurement measure(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                    const PeriodicConfig* periodic, const ExecutorConfig& executor, std::size_t repeat) {
    Measurement m;
    for (std::size_t r = 0; r < std::max<std::size_t>(repeat, 1); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        SolveResult result = run(app, hierarchy, solver, periodic, executor);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.samples.push_back(s);
        if (r == 0 || s < m.best_seconds) {
            m.best_seconds = s;
            m.report = std::move(result.report);
        }
    }
    return m;
}

}  // namespace tpmgrit
