#include "tpmgrit/grid.hpp"

#include "tpmgrit/errors.hpp"

#include <string>

namespace tpmgrit {

Hierarchy::Hierarchy(double period, std::vector<LevelSpec> levels)
    : period_(period), levels_(std::move(levels)) {
    if (levels_.empty()) {
        throw ArgumentError("hierarchy needs at least one level");
    }
    if (!(period_ > 0.0)) {
        throw ArgumentError("period must be positive");
    }
    std::size_t cumulative = 1;
    for (std::size_t l = 0; l < levels_.size(); ++l) {
        const auto& spec = levels_[l];
        if (spec.num_points < 2) {
            throw ArgumentError("level " + std::to_string(l) + " has fewer than 2 points");
        }
        cumulative_.push_back(cumulative);
        if (l + 1 < levels_.size()) {
            if (!spec.coarsen || *spec.coarsen < 2) {
                throw ArgumentError("level " + std::to_string(l) + " lacks a coarsening factor");
            }
            if ((spec.num_points - 1) % *spec.coarsen != 0 ||
                (spec.num_points - 1) / *spec.coarsen + 1 != levels_[l + 1].num_points) {
                throw ConfigError("level " + std::to_string(l + 1) +
                                  " is not a uniform coarsening of level " + std::to_string(l));
            }
            cumulative *= *spec.coarsen;
        }
    }
}

double Hierarchy::fine_time(std::size_t fine_index) const {
    const std::size_t last = fine_points() - 1;
    if (fine_index == last) {
        return period_;
    }
    return period_ * static_cast<double>(fine_index) / static_cast<double>(last);
}

Hierarchy build_hierarchy(std::size_t fine_points, double period, std::size_t coarsen,
                          std::size_t max_levels, std::size_t min_coarse) {
    if (fine_points < 3) {
        throw ArgumentError("fine grid needs at least 3 time points");
    }
    if (coarsen < 2) {
        throw ArgumentError("coarsening factor must be at least 2");
    }
    if (min_coarse < 2) {
        throw ArgumentError("coarsest level needs at least 2 points");
    }
    if (max_levels < 1) {
        throw ArgumentError("max_levels must be at least 1");
    }
    if ((fine_points - 1) % coarsen != 0) {
        throw ConfigError("level 0 with " + std::to_string(fine_points) +
                          " points cannot be coarsened by factor " + std::to_string(coarsen));
    }

    std::vector<LevelSpec> levels;
    std::size_t points = fine_points;
    for (std::size_t l = 0;; ++l) {
        levels.push_back({l, points, period / static_cast<double>(points - 1), std::nullopt});
        if (levels.size() == max_levels || (points - 1) % coarsen != 0) {
            break;
        }
        const std::size_t next = (points - 1) / coarsen + 1;
        if (next < min_coarse) {
            break;
        }
        levels.back().coarsen = coarsen;
        points = next;
    }
    return Hierarchy(period, std::move(levels));
}

Block OwnershipMap::level_block(std::size_t w, std::size_t cumulative_coarsen) const {
    const Block& fine = blocks.at(w);
    const bool last = w + 1 == blocks.size();
    return {fine.begin / cumulative_coarsen,
            last ? (fine.end - 1) / cumulative_coarsen + 1 : fine.end / cumulative_coarsen};
}

OwnershipMap partition(std::size_t fine_points, std::size_t workers, std::size_t alignment) {
    if (alignment < 1 || fine_points < 2 || (fine_points - 1) % alignment != 0) {
        throw ArgumentError("alignment must divide the number of fine intervals");
    }
    const std::size_t intervals = (fine_points - 1) / alignment;
    if (workers < 1 || workers > intervals) {
        throw ArgumentError("cannot split " + std::to_string(intervals) + " aligned intervals among " +
                            std::to_string(workers) + " workers");
    }
    OwnershipMap map{workers, {}};
    map.blocks.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = alignment * (w * intervals / workers);
        const std::size_t end =
            w + 1 == workers ? fine_points : alignment * ((w + 1) * intervals / workers);
        map.blocks.push_back({begin, end});
    }
    return map;
}

}  // namespace tpmgrit
