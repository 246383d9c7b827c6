#include "tpmgrit/errors.hpp"
#include "tpmgrit/grid.hpp"

#include <doctest.h>

using namespace tpmgrit;

TEST_CASE("two-level hierarchy of the default experiment") {
    const Hierarchy h = build_hierarchy(1025, 1.024, 8, 2, 2);
    REQUIRE(h.num_levels() == 2);
    CHECK(h.level(0).num_points == 1025);
    CHECK(h.level(1).num_points == 129);
    CHECK(h.level(0).dt == doctest::Approx(0.001));
    CHECK(h.level(1).dt == doctest::Approx(0.008));
    CHECK(h.coarsen(0) == 8);
    CHECK(h.coarsen(1) == 1);
    CHECK(h.cumulative_coarsen(1) == 8);
    CHECK(h.fine_index(1, 3) == 24);
    CHECK(h.time(0, 1024) == 1.024);
    CHECK(h.time(1, 128) == 1.024);
    CHECK(h.time(1, 5) == h.time(0, 40));
}

TEST_CASE("coarsening stops at min_coarse, max_levels and divisibility") {
    CHECK(build_hierarchy(17, 1.0, 2, 10, 2).num_levels() == 5);   // 17, 9, 5, 3, 2
    CHECK(build_hierarchy(17, 1.0, 2, 10, 3).num_levels() == 4);
    CHECK(build_hierarchy(17, 1.0, 4, 10, 2).num_levels() == 3);   // 17, 5, 2
    CHECK(build_hierarchy(25, 1.0, 2, 10, 2).num_levels() == 4);   // 25, 13, 7, 4 (3 not divisible by 2)
    CHECK(build_hierarchy(1025, 1.0, 8, 1, 2).num_levels() == 1);
}

TEST_CASE("illegal hierarchies") {
    CHECK_THROWS_AS(build_hierarchy(1024, 1.0, 8, 2, 2), ConfigError);
    CHECK_THROWS_AS(build_hierarchy(2, 1.0, 2, 2, 2), ArgumentError);
    CHECK_THROWS_AS(build_hierarchy(9, 1.0, 1, 2, 2), ArgumentError);
    CHECK_THROWS_AS(build_hierarchy(9, -1.0, 2, 2, 2), ArgumentError);
    CHECK_THROWS_AS(build_hierarchy(9, 1.0, 2, 0, 2), ArgumentError);
}

TEST_CASE("C-points") {
    CHECK(is_cpoint(0, 8));
    CHECK(is_cpoint(16, 8));
    CHECK_FALSE(is_cpoint(15, 8));
    CHECK(is_cpoint(7, 1));
}

TEST_CASE("partition into aligned blocks") {
    for (std::size_t w : {1u, 2u, 3u, 4u, 8u}) {
        const OwnershipMap map = partition(1025, w, 8);
        REQUIRE(map.num_workers == w);
        REQUIRE(map.blocks.size() == w);
        CHECK(map.blocks.front().begin == 0);
        CHECK(map.blocks.back().end == 1025);
        std::size_t smallest = 1025, largest = 0;
        for (std::size_t i = 0; i < w; ++i) {
            CHECK(map.blocks[i].begin % 8 == 0);
            if (i > 0) CHECK(map.blocks[i].begin == map.blocks[i - 1].end);
            smallest = std::min(smallest, map.blocks[i].size());
            largest = std::max(largest, map.blocks[i].size());
        }
        CHECK(largest - smallest <= 9);
    }
}

TEST_CASE("level blocks follow the fine blocks") {
    const OwnershipMap map = partition(1025, 4, 8);
    std::size_t covered = 0;
    for (std::size_t w = 0; w < 4; ++w) {
        const Block b = map.level_block(w, 8);
        CHECK(b.begin * 8 == map.blocks[w].begin);
        covered += b.size();
    }
    CHECK(covered == 129);
    CHECK(map.level_block(0, 1) == map.blocks[0]);
}

TEST_CASE("partition rejects more workers than aligned intervals") {
    CHECK_THROWS_AS(partition(17, 3, 8), ArgumentError);
    CHECK_THROWS_AS(partition(17, 2, 5), ArgumentError);
}
