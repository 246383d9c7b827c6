#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace tpmgrit {

enum class Relaxation { F, FCF };

/// Kinds of sweeps the solver performs over a level.
enum class PassKind { seed, f_relax, c_relax, residual, restrict, coarse_solve, interpolate };

std::string_view to_string(Relaxation relaxation);
std::string_view to_string(PassKind kind);

/// Identifies one sweep in the schedule every worker executes in lockstep.
/// Pass ids increase by one per sweep and are identical on all workers.
struct PassContext {
    std::uint64_t pass = 0;
    PassKind kind = PassKind::f_relax;
    std::size_t level = 0;
    std::size_t iteration = 0;
};

}  // namespace tpmgrit
