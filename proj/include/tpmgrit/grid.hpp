#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace tpmgrit {

/// One time grid of the hierarchy. Level 0 is the fine grid.
struct LevelSpec {
    std::size_t level = 0;
    std::size_t num_points = 0;
    double dt = 0.0;
    /// Coarsening factor to the next level; empty on the coarsest level.
    std::optional<std::size_t> coarsen;
};

/// Ladder of uniformly coarsened time grids over one period [0, T].
///
/// Every point of level l sits on fine index n * cumulative_coarsen(l), so a
/// time value is always computed from its fine index. The last point of every
/// level evaluates to exactly T.
class Hierarchy {
public:
    Hierarchy(double period, std::vector<LevelSpec> levels);

    double period() const noexcept { return period_; }
    std::size_t fine_points() const noexcept { return levels_.front().num_points; }
    std::size_t num_levels() const noexcept { return levels_.size(); }
    std::size_t coarsest() const noexcept { return levels_.size() - 1; }

    const LevelSpec& level(std::size_t l) const { return levels_.at(l); }
    std::span<const LevelSpec> levels() const noexcept { return levels_; }

    /// Product of the coarsening factors of all levels finer than l.
    std::size_t cumulative_coarsen(std::size_t l) const { return cumulative_.at(l); }

    /// Coarsening factor from level l to l + 1 (1 on the coarsest level).
    std::size_t coarsen(std::size_t l) const { return levels_.at(l).coarsen.value_or(1); }

    std::size_t fine_index(std::size_t l, std::size_t n) const { return n * cumulative_.at(l); }

    double fine_time(std::size_t fine_index) const;
    double time(std::size_t l, std::size_t n) const { return fine_time(fine_index(l, n)); }

private:
    double period_;
    std::vector<LevelSpec> levels_;
    std::vector<std::size_t> cumulative_;
};

/// Builds the hierarchy by repeated coarsening with a uniform factor.
///
/// Coarsening stops when max_levels is reached, when the next level would
/// have fewer than min_coarse points, or when N_l - 1 is not divisible by the
/// factor. The fine grid itself must be divisible.
Hierarchy build_hierarchy(std::size_t fine_points, double period, std::size_t coarsen,
                          std::size_t max_levels, std::size_t min_coarse);

/// True iff index is a C-point for the given cumulative coarsening product.
constexpr bool is_cpoint(std::size_t index, std::size_t cumulative_coarsen) noexcept {
    return index % cumulative_coarsen == 0;
}

/// Half-open range of fine-grid time indices.
struct Block {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool operator==(const Block&) const = default;
};

/// Contiguous per-worker ownership of fine time points.
struct OwnershipMap {
    std::size_t num_workers = 0;
    std::vector<Block> blocks;

    /// The block of worker w expressed in level-l indices.
    Block level_block(std::size_t w, std::size_t cumulative_coarsen) const;
};

/// Splits [0, fine_points) into near-equal blocks whose starts are multiples
/// of alignment (the cumulative coarsening of the coarsest level).
OwnershipMap partition(std::size_t fine_points, std::size_t workers, std::size_t alignment);

}  // namespace tpmgrit
