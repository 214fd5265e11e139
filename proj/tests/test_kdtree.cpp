#include "catch_amalgamated.hpp"

#include <limits>
#include <random>

#include "mib/kdtree.hpp"

#include "helpers.hpp"

using namespace mib;

namespace {

Matrix column(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

}  // namespace

TEST_CASE("kth neighbour distances on a uniform grid") {
    const Matrix pts = column({0, 1, 2, 3});
    KdTree tree(pts);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(tree.kth_neighbor_distance(i, 1) == 1.0);
}

TEST_CASE("kth neighbour distances, hand-enumerable case") {
    const Matrix pts = column({0, 1, 3});
    KdTree tree(pts);
    REQUIRE(tree.kth_neighbor_distance(0, 2) == 3.0);
    REQUIRE(tree.kth_neighbor_distance(1, 2) == 2.0);
    REQUIRE(tree.kth_neighbor_distance(2, 2) == 3.0);
}

TEST_CASE("invalid k is rejected") {
    const Matrix pts = column({0, 1, 3});
    KdTree tree(pts);
    REQUIRE_THROWS_AS(tree.kth_neighbor_distance(0, 0), UsageError);
    REQUIRE_THROWS_AS(tree.kth_neighbor_distance(0, 3), UsageError);
}

TEST_CASE("strict range count, hand cases") {
    const Matrix pts = column({0, 1, 2, 3});
    KdTree tree(pts);
    REQUIRE(tree.count_within(0, 1.5, true) == 1);
    REQUIRE(tree.count_within(1, 1.5, true) == 2);
}

TEST_CASE("identical points count each other under any positive radius") {
    Matrix pts(5, 2, 0.42);
    KdTree tree(pts);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(tree.count_within(i, 1e-12, true) == 4);
}

TEST_CASE("radius zero distinguishes strict from non-strict counting") {
    Matrix pts(4, 1);
    pts(0, 0) = 1.0;
    pts(1, 0) = 1.0;  // duplicate of row 0
    pts(2, 0) = 2.0;
    pts(3, 0) = 3.0;
    KdTree tree(pts);
    // non-strict radius 0 returns exact duplicates only
    REQUIRE(tree.count_within(0, 0.0, false) == 1);
    REQUIRE(tree.count_within(2, 0.0, false) == 0);
    // strict radius 0 returns nothing
    REQUIRE(tree.count_within(0, 0.0, true) == 0);
}

TEST_CASE("every point is reachable exactly once") {
    const Matrix pts = test_helpers::random_matrix(257, 3, 99);
    KdTree tree(pts);
    for (std::size_t i = 0; i < pts.rows(); ++i)
        REQUIRE(tree.count_within(i, std::numeric_limits<double>::infinity(), true) ==
                pts.rows() - 1);
}

TEST_CASE("tree agrees with the brute-force scan exactly") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 4; ++trial) {
        const std::size_t n = 100 + 133 * static_cast<std::size_t>(trial);
        Matrix pts = test_helpers::random_matrix(n, 2 + trial % 3, rng());
        // inject duplicates
        for (std::size_t r = 0; r < n / 8; ++r)
            for (std::size_t c = 0; c < pts.cols(); ++c) pts(n - 1 - r, c) = pts(r, c);
        KdTree tree(pts);
        std::uniform_real_distribution<double> radius(0.0, 2.0);
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(tree.kth_neighbor_distance(i, 5) ==
                    brute_kth_neighbor_distance(pts, i, 5));
            const double r = radius(rng);
            REQUIRE(tree.count_within(i, r, true) == brute_count_within(pts, i, r, true));
            REQUIRE(tree.count_within(i, r, false) ==
                    brute_count_within(pts, i, r, false));
        }
    }
}
