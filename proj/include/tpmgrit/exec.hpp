#pragma once

#include "tpmgrit/mgrit.hpp"
#include "tpmgrit/periodic.hpp"
#include "tpmgrit/worker.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string_view>
#include <vector>

namespace tpmgrit {

enum class ExecutionMode { serial, threaded };

std::string_view to_string(ExecutionMode mode);

struct ExecutorConfig {
    std::size_t workers = 1;
    ExecutionMode mode = ExecutionMode::serial;
    std::chrono::milliseconds watchdog = std::chrono::seconds(60);
    bool record_timings = true;

    void validate() const;
};

/// Unbounded FIFO between one sender and one receiver.
class Channel {
public:
    void push(BoundaryMessage message);
    /// Empty on timeout.
    std::optional<BoundaryMessage> pop(std::chrono::milliseconds watchdog);
    void close();
    bool closed() const;
    std::size_t pending() const;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<BoundaryMessage> queue_;
    bool closed_ = false;
};

/// One channel per ordered worker pair; used by threads of one process.
class ThreadedTransport : public Transport {
public:
    ThreadedTransport(std::size_t workers, std::chrono::milliseconds watchdog);

    void send(std::size_t from, std::size_t to, BoundaryMessage message) override;
    BoundaryMessage receive(std::size_t from, std::size_t to, BoundaryMessage::Kind kind,
                            std::uint64_t pass, const PassContext& ctx) override;

    /// Unblocks every receiver with a ProtocolError.
    void close_all();
    /// Messages sent but never received.
    std::size_t undelivered() const;

private:
    Channel& channel(std::size_t from, std::size_t to);

    std::size_t workers_;
    std::chrono::milliseconds watchdog_;
    std::vector<std::unique_ptr<Channel>> channels_;
};

/// Runs solve (periodic == nullptr or disabled) or solve_periodic with the
/// fine grid split into contiguous blocks, one per worker.
SolveResult run(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                const PeriodicConfig* periodic, const ExecutorConfig& executor);

struct Measurement {
    double best_seconds = 0.0;
    std::vector<double> samples;
    /// Report of the fastest repetition.
    RunReport report;
};

/// Best of `repeat` runs of an executor configuration.
Measurement measure(const Application& app, const Hierarchy& hierarchy, const SolverConfig& solver,
                    const PeriodicConfig* periodic, const ExecutorConfig& executor,
                    std::size_t repeat);

/// Best wall-clock seconds of `repeat` calls.
double best_of(std::size_t repeat, const std::function<void()>& fn);

}  // namespace tpmgrit
