#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "slc/transfer.hpp"

using namespace slc;

namespace {

Mesh cloud(const std::vector<Vec3>& pts) {
    Mesh m;
    m.vertices = pts;
    return m;
}

double assignment_cost(const std::vector<Vec3>& fitted, const Mesh& target,
                       const std::vector<int>& assignment) {
    double total = 0.0;
    for (std::size_t j = 0; j < fitted.size(); ++j)
        total += (fitted[j] - target.vertices[assignment[j]]).norm();
    return total;
}

} // namespace

TEST_CASE("identical point sets map to themselves") {
    Rng rng(61);
    const auto pts = oracle::random_points(rng, 80, 40.0);
    const auto out = transfer_annotation(pts, cloud(pts), {}, {});
    for (std::size_t j = 0; j < pts.size(); ++j)
        CHECK(out.source_indices[j] == static_cast<int>(j));
    CHECK(assignment_cost(pts, cloud(pts), out.source_indices) == 0.0);
}

TEST_CASE("conflicting template vertices: the closer one wins the shared target") {
    // both template vertices are nearest to target 0; vertex 0 is closer
    const std::vector<Vec3> fitted = {{0.0, 0, 0}, {0.3, 0, 0}};
    const Mesh target = cloud({{0.05, 0, 0}, {1.0, 0, 0}});
    const auto out = transfer_annotation(fitted, target, {}, {});
    CHECK(out.source_indices[0] == 0);
    CHECK(out.source_indices[1] == 1);
}

TEST_CASE("first accepted pair is the globally closest candidate") {
    Rng rng(62);
    const auto fitted = oracle::random_points(rng, 40, 30.0);
    const Mesh target = cloud(oracle::random_points(rng, 70, 30.0));
    const auto out = transfer_annotation(fitted, target, {}, {});

    double best = std::numeric_limits<double>::infinity();
    int best_j = -1, best_t = -1;
    for (std::size_t j = 0; j < fitted.size(); ++j)
        for (int t = 0; t < target.vertex_count(); ++t) {
            const double d = (fitted[j] - target.vertices[t]).norm();
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
                best_t = t;
            }
        }
    CHECK(out.source_indices[best_j] == best_t);
}

TEST_CASE("greedy cost is near the optimal injective assignment") {
    Rng rng(63);
    for (int trial = 0; trial < 5; ++trial) {
        const auto fitted = oracle::random_points(rng, 50, 25.0);
        const Mesh target = cloud(oracle::random_points(rng, 60, 25.0));
        const auto out = transfer_annotation(fitted, target, {}, {});

        std::set<int> used(out.source_indices.begin(), out.source_indices.end());
        REQUIRE(used.size() == fitted.size()); // injective

        std::vector<std::vector<double>> cost(fitted.size());
        for (std::size_t j = 0; j < fitted.size(); ++j) {
            cost[j].resize(target.vertex_count());
            for (int t = 0; t < target.vertex_count(); ++t)
                cost[j][t] = (fitted[j] - target.vertices[t]).norm();
        }
        const double optimal = oracle::hungarian(cost);
        const double greedy = assignment_cost(fitted, target, out.source_indices);
        CHECK(greedy >= optimal - 1e-9);
        CHECK(greedy <= 1.10 * optimal);
    }
}

TEST_CASE("assignment is injective and deterministic on random instances") {
    Rng rng(64);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 5 + static_cast<int>(rng.below(60));
        const int n = m + static_cast<int>(rng.below(40));
        const auto fitted = oracle::random_points(rng, m, 50.0);
        const Mesh target = cloud(oracle::random_points(rng, n, 50.0));
        const auto a = transfer_annotation(fitted, target, {}, {});
        const auto b = transfer_annotation(fitted, target, {}, {});
        CHECK(a.source_indices == b.source_indices);
        std::set<int> used(a.source_indices.begin(), a.source_indices.end());
        CHECK(used.size() == fitted.size());
        for (std::size_t j = 0; j < fitted.size(); ++j)
            CHECK(a.mesh.vertices[j] == target.vertices[a.source_indices[j]]);
    }
}

TEST_CASE("faces and landmark names carry over") {
    Rng rng(65);
    const auto fitted = oracle::random_points(rng, 10, 10.0);
    const Mesh target = cloud(oracle::random_points(rng, 15, 10.0));
    const std::vector<Face> topo = {{0, 1, 2}, {2, 3, 4}};
    const LandmarkMap lmks = {{"nose_tip", 3}, {"chin", 7}};
    const auto out = transfer_annotation(fitted, target, topo, lmks);
    CHECK(out.mesh.faces == topo);
    CHECK(out.mesh.landmarks == lmks);
}

TEST_CASE("too-small targets are rejected") {
    Rng rng(66);
    const auto fitted = oracle::random_points(rng, 20, 10.0);
    const Mesh target = cloud(oracle::random_points(rng, 19, 10.0));
    CHECK_THROWS_AS(transfer_annotation(fitted, target, {}, {}), TargetTooSmall);
}

TEST_CASE("landmark_error") {
    Rng rng(67);
    const auto pts = oracle::random_points(rng, 30, 20.0);
    Mesh target = cloud(pts);
    target.landmarks = {{"a", 4}, {"b", 9}};

    ReindexedModel reindexed;
    reindexed.mesh = target;
    reindexed.mesh.landmarks = {{"a", 4}, {"b", 9}, {"extra", 0}};
    reindexed.source_indices.resize(pts.size());

    SUBCASE("identity transfer has zero error") {
        const auto errs = landmark_error(reindexed, target, target.landmarks);
        CHECK(errs.at("a") == 0.0);
        CHECK(errs.at("b") == 0.0);
        CHECK(errs.size() == 2); // only shared names
    }
    SUBCASE("uniform 2mm offset shows up exactly") {
        Mesh shifted = target;
        for (auto& v : shifted.vertices)
            v += Vec3(2.0, 0, 0);
        const auto errs = landmark_error(reindexed, shifted, target.landmarks);
        CHECK(errs.at("a") == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(errs.at("b") == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("disjoint names are an error") {
        const LandmarkMap other = {{"zzz", 1}};
        CHECK_THROWS_AS(landmark_error(reindexed, target, other), NoSharedLandmarks);
    }
}
