#pragma once

#include "tpmgrit/mgrit.hpp"
#include "tpmgrit/periodic.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

namespace tpmgrit {

/// Contribution of one worker to the per-iteration halting decision.
struct VotePartial {
    std::vector<PointResidual> residuals;  ///< owned fine C-points, ascending
    std::optional<double> jump;            ///< set by the owner of T
    bool ic_converged = false;
    std::optional<std::size_t> ic_converged_iteration;
};

struct BoundaryMessage {
    enum class Kind { left_value, ic_update, residual_partial, halt_vote };
    Kind kind = Kind::left_value;
    std::uint64_t pass = 0;
    std::size_t time_index = 0;
    StateVector payload;
    VotePartial vote;
};

std::string_view to_string(BoundaryMessage::Kind kind);

/// Point-to-point message transport between workers.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(std::size_t from, std::size_t to, BoundaryMessage message) = 0;
    /// Blocks for the next message from `from`; raises ProtocolError when it
    /// does not match the expected kind and pass or the watchdog expires.
    virtual BoundaryMessage receive(std::size_t from, std::size_t to, BoundaryMessage::Kind kind,
                                    std::uint64_t pass, const PassContext& ctx) = 0;
};

struct WorkerSetup {
    std::size_t rank = 0;
    const OwnershipMap* ownership = nullptr;
    Transport* transport = nullptr;      ///< may be null with a single worker
    UpdateMailbox* mailbox = nullptr;    ///< required for periodic solves
    std::chrono::milliseconds watchdog = std::chrono::seconds(60);
};

struct WorkerOutput {
    /// Level-0 values of the owned fine block.
    std::vector<StateVector> owned;
    RunReport report;
};

/// Executes the full solve schedule for one worker. Every worker runs the
/// same sequence of passes; cross-block data moves only through the
/// transport and the mailbox.
WorkerOutput run_worker(const Application& app, const Hierarchy& hierarchy,
                        const SolverConfig& solver, const PeriodicConfig* periodic,
                        const WorkerSetup& setup);

/// Single-worker run in the calling thread.
SolveResult run_single_worker(const Application& app, const Hierarchy& hierarchy,
                              const SolverConfig& solver, const PeriodicConfig* periodic);

/// Level-0 state assembled from the owned blocks of every worker.
SpaceTimeState assemble_state(const Hierarchy& hierarchy, std::vector<WorkerOutput>& outputs);

}  // namespace tpmgrit
