#include <doctest.h>

#include <Eigen/Geometry>

#include "oracles.hpp"
#include "slc/geometry.hpp"
#include "slc/synth.hpp"

using namespace slc;

TEST_CASE("spatial index matches brute force on 1000 random point sets") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(60));
        // clustered coordinates provoke exact distance ties
        std::vector<Vec3> pts(n);
        for (auto& p : pts)
            p = Vec3(static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6)),
                     static_cast<double>(rng.below(6)));
        SpatialIndex index(pts);
        for (int q = 0; q < 4; ++q) {
            const Vec3 query(static_cast<double>(rng.below(7)), static_cast<double>(rng.below(7)),
                             rng.uniform(-1, 7));
            const auto hit = index.nearest(query);
            const auto [ref_idx, ref_d] = oracle::nearest(pts, query);
            REQUIRE(hit.index == ref_idx);
            REQUIRE(hit.distance == ref_d);

            const int k = 1 + static_cast<int>(rng.below(8));
            const auto hits = index.knearest(query, k);
            const auto ref = oracle::knearest(pts, query, k);
            REQUIRE(hits.size() == ref.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
                REQUIRE(hits[i].index == ref[i].first);
                REQUIRE(hits[i].distance == ref[i].second);
            }
        }
    }
}

TEST_CASE("crop keeps everything when the radius covers the mesh") {
    Rng rng(5);
    Mesh mesh;
    for (int i = 0; i < 200; ++i) {
        Vec3 p(rng.normal(), rng.normal(), rng.normal());
        mesh.vertices.push_back(10.0 * p.normalized());
    }
    const Mesh cropped = crop_and_center(mesh, 100.0);
    CHECK(cropped.vertex_count() == mesh.vertex_count());
    Vec3 bary = Vec3::Zero();
    for (const auto& v : cropped.vertices)
        bary += v;
    CHECK((bary / cropped.vertex_count()).norm() < 1e-9);
}

TEST_CASE("crop with radius zero keeps exactly the nose tip") {
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 1, 5}, {2, 0, 1}};
    const Mesh cropped = crop_and_center(mesh, 0.0);
    REQUIRE(cropped.vertex_count() == 1);
    CHECK(cropped.vertices[0].norm() == 0.0); // centered on itself
}

TEST_CASE("crop equals a brute-force distance filter and remaps everything") {
    const synth::FaceSpec spec;
    const Mesh face = synth::generate(spec);
    const int tip = nose_tip(face);
    const double radius = 60.0;

    const CropResult crop = crop_and_center_detail(face, radius);

    std::vector<int> expected;
    for (int i = 0; i < face.vertex_count(); ++i)
        if (oracle::dist(face.vertices[i], face.vertices[tip]) <= radius)
            expected.push_back(i);
    REQUIRE(crop.kept == expected);
    CHECK(crop.mesh.vertex_count() < face.vertex_count());

    // faces only reference surviving vertices, and landmark remap is consistent
    for (const auto& f : crop.mesh.faces)
        for (int idx : f)
            CHECK(idx < crop.mesh.vertex_count());
    for (const auto& [name, idx] : crop.mesh.landmarks)
        CHECK((face.vertices[crop.kept[idx]] + crop.offset - crop.mesh.vertices[idx]).norm() ==
              0.0);
}

TEST_CASE("rigid icp recovers a known rotation and translation") {
    Rng rng(11);
    Mesh source;
    source.vertices = oracle::random_points(rng, 300, 50.0);

    const double angle = 10.0 * std::numbers::pi / 180.0;
    const Mat3 R = Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
    const Vec3 t(5, 0, 0);
    Mesh target;
    for (const auto& p : source.vertices)
        target.vertices.push_back(R * p + t);

    const RigidIcpResult result = rigid_icp(source, target, 100, 1e-12);
    const auto moved = apply_transform(source.vertices, result.transform);
    double sq = 0.0;
    for (std::size_t i = 0; i < moved.size(); ++i)
        sq += (moved[i] - target.vertices[i]).squaredNorm();
    CHECK(std::sqrt(sq / moved.size()) < 1e-6);

    for (std::size_t i = 1; i < result.rms_trace.size(); ++i)
        CHECK(result.rms_trace[i] <= result.rms_trace[i - 1] + 1e-12);
}

TEST_CASE("rigid icp on identical meshes is the identity") {
    Rng rng(12);
    Mesh mesh;
    mesh.vertices = oracle::random_points(rng, 100, 30.0);
    const RigidIcpResult result = rigid_icp(mesh, mesh, 20, 1e-12);
    CHECK((result.transform.P - Mat3::Identity()).norm() < 1e-9);
    CHECK(result.transform.T.norm() < 1e-9);
}

TEST_CASE("rigid icp with two points is degenerate") {
    Mesh a, b;
    a.vertices = {{0, 0, 0}, {1, 0, 0}};
    b.vertices = {{0, 0, 1}, {1, 0, 1}};
    CHECK_THROWS_AS(rigid_icp(a, b, 10, 1e-9), DegenerateConfiguration);
}

TEST_CASE("similarity estimation is exact on identity and scaling") {
    Rng rng(13);
    const auto tmpl = oracle::random_points(rng, 50, 40.0);

    SUBCASE("identity") {
        const SimilarityTransform sim = estimate_similarity(tmpl, tmpl);
        CHECK((sim.P - Mat3::Identity()).norm() < 1e-9);
        CHECK(sim.T.norm() < 1e-9);
    }
    SUBCASE("target is the template scaled by 0.5") {
        std::vector<Vec3> target;
        for (const auto& p : tmpl)
            target.push_back(0.5 * p);
        const SimilarityTransform sim = estimate_similarity(tmpl, target);
        CHECK((sim.P - 2.0 * Mat3::Identity()).norm() < 1e-9);
        double sq = 0.0;
        for (std::size_t i = 0; i < tmpl.size(); ++i)
            sq += (sim.apply(target[i]) - tmpl[i]).squaredNorm();
        CHECK(std::sqrt(sq) < 1e-9);
    }
}

TEST_CASE("similarity estimation matches an independent normal-equations solve") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const auto tmpl = oracle::random_points(rng, 60, 30.0);
        const auto target = oracle::random_points(rng, 60, 30.0);
        const SimilarityTransform sim = estimate_similarity(tmpl, target);

        // independent route: normal equations on barycentered coordinates
        Vec3 sbar = Vec3::Zero(), tbar = Vec3::Zero();
        for (std::size_t i = 0; i < target.size(); ++i) {
            sbar += tmpl[i];
            tbar += target[i];
        }
        sbar /= double(tmpl.size());
        tbar /= double(target.size());
        Mat3 AtA = Mat3::Zero(), AtB = Mat3::Zero();
        for (std::size_t i = 0; i < target.size(); ++i) {
            AtA += (target[i] - tbar) * (target[i] - tbar).transpose();
            AtB += (target[i] - tbar) * (tmpl[i] - sbar).transpose();
        }
        const Mat3 P_ref = AtA.ldlt().solve(AtB);
        const Vec3 T_ref = sbar - P_ref.transpose() * tbar;
        CHECK((sim.P - P_ref).norm() < 1e-9 * std::max(1.0, P_ref.norm()));

        auto residual = [&](const Mat3& P, const Vec3& T) {
            double sq = 0.0;
            for (std::size_t i = 0; i < target.size(); ++i)
                sq += (P.transpose() * target[i] + T - tmpl[i]).squaredNorm();
            return sq;
        };
        CHECK(residual(sim.P, sim.T) <= residual(P_ref, T_ref) * (1.0 + 1e-9) + 1e-9);
        // least-squares optimality: never worse than leaving the target alone
        CHECK(residual(sim.P, sim.T) <= residual(Mat3::Identity(), Vec3::Zero()) + 1e-9);
    }
}

TEST_CASE("similarity estimation rejects affinely dependent targets") {
    Rng rng(17);
    std::vector<Vec3> tmpl, target;
    for (int i = 0; i < 10; ++i) {
        tmpl.emplace_back(rng.normal(), rng.normal(), rng.normal());
        // a plane offset from the origin: affinely dependent
        target.emplace_back(rng.uniform(0, 5), rng.uniform(0, 5), 7.0);
    }
    CHECK_THROWS_AS(estimate_similarity(tmpl, target), DegenerateConfiguration);
}

TEST_CASE("apply_transform basics") {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 2, 3}};
    SUBCASE("identity") {
        const auto out = apply_transform(pts, SimilarityTransform::identity());
        CHECK(out == pts);
    }
    SUBCASE("pure translation") {
        const auto out = apply_transform(pts, SimilarityTransform::translation({1, 2, 3}));
        CHECK((out[0] - Vec3(1, 2, 3)).norm() == 0.0);
    }
    SUBCASE("estimate-then-apply reconstructs the template") {
        Rng rng(15);
        const auto tmpl = oracle::random_points(rng, 30, 20.0);
        std::vector<Vec3> target;
        const Mat3 R = oracle::random_rotation(rng, 0.4);
        for (const auto& p : tmpl)
            target.push_back(R * (0.9 * p) + Vec3(3, -2, 1));
        const auto sim = estimate_similarity(tmpl, target);
        const auto back = apply_transform(target, sim);
        double worst = 0.0;
        for (std::size_t i = 0; i < tmpl.size(); ++i)
            worst = std::max(worst, (back[i] - tmpl[i]).norm());
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("preprocess_target aligns a shifted rotated copy back onto the reference") {
    const synth::FaceSpec spec;
    const Mesh face = synth::generate(spec);

    Rng rng(16);
    const Mat3 R = oracle::random_rotation(rng, 5.0 * std::numbers::pi / 180.0);
    Mesh moved;
    moved.vertices.reserve(face.vertices.size());
    for (const auto& p : face.vertices)
        moved.vertices.push_back(R * p + Vec3(7, -4, 12));
    moved.faces = face.faces;

    const PreprocessedTarget prep = preprocess_target(moved, face.vertices, 500.0, 80, 1e-10);
    REQUIRE(prep.mesh.vertex_count() == face.vertex_count());

    // coarse alignment contract: residual NN error below half the grid
    // spacing (the fitting loop's own similarity step removes the rest)
    SpatialIndex ref_index(face.vertices);
    double sum = 0.0;
    for (const auto& v : prep.mesh.vertices)
        sum += ref_index.nearest(v).distance;
    CHECK(sum / prep.mesh.vertex_count() < 1.6);

    // a near-aligned copy is recovered to machine precision
    Mesh nudged;
    for (const auto& p : face.vertices)
        nudged.vertices.push_back(p + Vec3(2, 1, -3));
    const PreprocessedTarget prep2 = preprocess_target(nudged, face.vertices, 500.0, 80, 1e-12);
    double sum2 = 0.0;
    for (const auto& v : prep2.mesh.vertices)
        sum2 += ref_index.nearest(v).distance;
    CHECK(sum2 / prep2.mesh.vertex_count() < 1e-9);

    // the recorded transform reproduces the aligned cloud from the raw one
    for (int i = 0; i < face.vertex_count(); i += 97) {
        const Vec3 via = prep.transform.apply(moved.vertices[prep.kept[i]]);
        CHECK((via - prep.mesh.vertices[i]).norm() < 1e-9);
    }
}
