#include <doctest.h>

#include "oracles.hpp"
#include "slc/nrf.hpp"
#include "slc/slc_learn.hpp"
#include "slc/synth.hpp"

using namespace slc;

namespace {

bool same_correspondence(const Correspondence& got, const oracle::CorrespondRef& ref) {
    const std::size_t m = ref.targets.size();
    if (got.targets.size() != m || got.tau_global != ref.tau_global ||
        got.rejected_count != ref.rejected)
        return false;
    if (got.regions != ref.regions || got.tau_local != ref.tau_local)
        return false;
    for (std::size_t j = 0; j < m; ++j) {
        const bool centroid = got.kinds[j] == AssignmentKind::Centroid;
        if (centroid != ref.is_centroid[j])
            return false;
        if (got.region_sizes[j] != ref.region_sizes[j])
            return false;
        if (got.targets[j] != ref.targets[j])
            return false;
    }
    return true;
}

SlcModel tiny_model(Rng& rng, int m, int k) {
    SlcModel model;
    model.k = k;
    model.mean = VecX::Zero(3 * m);
    for (Eigen::Index i = 0; i < model.mean.size(); ++i)
        model.mean[i] = rng.uniform(-30, 30);
    model.basis = MatX::Zero(3 * m, k);
    for (Eigen::Index i = 0; i < model.basis.size(); ++i)
        model.basis.data()[i] = rng.uniform(0.0, 1.0);
    model.directions = MatX::Constant(4, k, 0.5);
    model.weights = VecX::Constant(k, 0.5);
    return model;
}

} // namespace

TEST_CASE("correspond on identical sets is the identity with no rejections") {
    Rng rng(51);
    const auto pts = oracle::random_points(rng, 120, 50.0);
    const Correspondence corr = correspond(pts, pts);
    CHECK(corr.rejected_count == 0);
    CHECK(corr.tau_global == 0.0);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        CHECK(corr.kinds[j] == AssignmentKind::Centroid);
        CHECK(corr.region_sizes[j] == 1);
        CHECK(corr.targets[j] == pts[j]);
    }
}

TEST_CASE("single template vertex takes the barycenter of equidistant targets") {
    const std::vector<Vec3> tmpl = {{0, 0, 0}};
    const std::vector<Vec3> target = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
    const Correspondence corr = correspond(tmpl, target);
    CHECK(corr.kinds[0] == AssignmentKind::Centroid);
    CHECK(corr.region_sizes[0] == 4);
    CHECK(corr.rejected_count == 0); // equal distances sit on the threshold
    CHECK(corr.targets[0].norm() < 1e-15);
}

TEST_CASE("correspond is deterministic and covers every template vertex once") {
    Rng rng(57);
    const auto tmpl = oracle::random_points(rng, 150, 50.0);
    const auto target = oracle::random_points(rng, 400, 50.0);
    const Correspondence a = correspond(tmpl, target);
    const Correspondence b = correspond(tmpl, target);
    REQUIRE(a.targets.size() == tmpl.size());
    for (std::size_t j = 0; j < tmpl.size(); ++j) {
        CHECK(a.targets[j] == b.targets[j]);
        CHECK(a.kinds[j] == b.kinds[j]);
    }
    CHECK(a.rejected_count == b.rejected_count);
    CHECK(a.tau_global == b.tau_global);
}

TEST_CASE("correspond equals the brute-force reference exactly") {
    Rng rng(52);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 20 + static_cast<int>(rng.below(80));
        const int n = 50 + static_cast<int>(rng.below(400));
        const auto tmpl = oracle::random_points(rng, m, 60.0);
        auto target = oracle::random_points(rng, n, 60.0);
        // a handful of outliers far off the surface
        for (int o = 0; o < 5; ++o)
            target.push_back(Vec3(300 + 40 * o, -250, 400));
        const Correspondence got = correspond(tmpl, target);
        const auto ref = oracle::correspond_reference(tmpl, target);
        REQUIRE(same_correspondence(got, ref));
    }
}

TEST_CASE("far junk cluster never contaminates centroid assignments") {
    const synth::FaceSpec spec{.res_u = 25, .res_v = 25};
    const Mesh face = synth::generate(spec);
    Rng rng(53);
    const auto degraded = synth::degrade(face, 0.3, 1.0, 7);
    const auto& tmpl = face.vertices;
    auto clean_target = degraded.mesh.vertices;

    const Correspondence clean = correspond(tmpl, clean_target);

    auto junked = clean_target;
    const int n_junk = 40;
    for (int i = 0; i < n_junk; ++i)
        junked.push_back(Vec3(2500 + rng.uniform(0, 50), 2500, 2500)); // >> 10 * tau_g
    const Correspondence junk = correspond(tmpl, junked);

    CHECK(junk.tau_global == clean.tau_global);
    CHECK(junk.rejected_count >= clean.rejected_count + n_junk);
    const int n_clean = static_cast<int>(clean_target.size());
    for (std::size_t j = 0; j < tmpl.size(); ++j) {
        bool region_has_junk = false;
        for (int i : junk.regions[j])
            region_has_junk |= i >= n_clean;
        if (!region_has_junk) {
            CHECK(junk.targets[j] == clean.targets[j]);
            CHECK(junk.kinds[j] == clean.kinds[j]);
        }
        // junk points never end up assigned, whether by centroid or fallback
        CHECK(junk.targets[j].x() < 2000.0);
    }
}

TEST_CASE("solve_deformation") {
    Rng rng(54);
    SlcModel model = tiny_model(rng, 40, 6);
    const auto current = points_from_shape_vector(model.mean);

    SUBCASE("zero residual gives zero coefficients") {
        Correspondence corr;
        corr.targets = current;
        const VecX alpha = solve_deformation(corr, current, model, 1.0);
        CHECK(alpha.norm() == 0.0);
    }
    SUBCASE("single column reduces to scalar least squares") {
        SlcModel one = tiny_model(rng, 40, 1);
        const auto pts = points_from_shape_vector(one.mean);
        Correspondence corr;
        corr.targets = pts;
        for (auto& t : corr.targets)
            t += Vec3(rng.normal(), rng.normal(), rng.normal());
        VecX x(3 * pts.size());
        for (std::size_t j = 0; j < pts.size(); ++j)
            x.segment<3>(3 * j) = corr.targets[j] - pts[j];
        const VecX alpha = solve_deformation(corr, pts, one, 0.0);
        const VecX b = one.basis.col(0);
        CHECK(alpha[0] == doctest::Approx(b.dot(x) / b.dot(b)).epsilon(1e-12));
    }
    SUBCASE("matches an independent descent minimizer and is optimal") {
        Correspondence corr;
        corr.targets = current;
        for (auto& t : corr.targets)
            t += Vec3(rng.normal(), rng.normal(), rng.normal());
        const double lambda = 1.0;
        const VecX alpha = solve_deformation(corr, current, model, lambda);

        VecX x(3 * current.size());
        for (std::size_t j = 0; j < current.size(); ++j)
            x.segment<3>(3 * j) = corr.targets[j] - current[j];
        const VecX ref = oracle::quadratic_descent(model.basis, x, model.weights, lambda);
        CHECK((alpha - ref).norm() < 1e-6 * std::max(1.0, ref.norm()));

        auto objective = [&](const VecX& a) {
            double reg = 0.0;
            for (int j = 0; j < model.k; ++j)
                reg += a[j] * a[j] / std::max(model.weights[j], 1e-8);
            return (x - model.basis * a).squaredNorm() + lambda * reg;
        };
        const double at_alpha = objective(alpha);
        for (int p = 0; p < 100; ++p) {
            VecX delta(model.k);
            for (int j = 0; j < model.k; ++j)
                delta[j] = rng.normal(0.0, 0.05);
            CHECK(objective(alpha + delta) >= at_alpha - 1e-9 * std::abs(at_alpha));
        }
    }
    SUBCASE("lambda 0 with a rank-deficient basis is singular") {
        SlcModel degenerate = tiny_model(rng, 40, 3);
        degenerate.basis.col(2) = degenerate.basis.col(1); // duplicate column
        Correspondence corr;
        corr.targets = current;
        CHECK_THROWS_AS(solve_deformation(corr, current, degenerate, 0.0), SingularSystem);
    }
}

TEST_CASE("per_vertex_error") {
    SUBCASE("identical sets give zeros") {
        Rng rng(55);
        const auto pts = oracle::random_points(rng, 50, 20.0);
        const auto rep = per_vertex_error(pts, pts);
        CHECK(rep.mean == 0.0);
        for (double d : rep.per_vertex)
            CHECK(d == 0.0);
    }
    SUBCASE("uniform offset against a dense plane") {
        std::vector<Vec3> grid;
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j)
                grid.emplace_back(i, j, 0.0);
        std::vector<Vec3> fitted;
        for (const auto& p : grid)
            fitted.push_back(p + Vec3(0.25, 0, 0));
        const auto rep = per_vertex_error(fitted, grid);
        CHECK(rep.mean == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("matches brute force exactly") {
        Rng rng(56);
        const auto fitted = oracle::random_points(rng, 80, 40.0);
        const auto target = oracle::random_points(rng, 200, 40.0);
        const auto rep = per_vertex_error(fitted, target);
        for (std::size_t j = 0; j < fitted.size(); ++j)
            CHECK(rep.per_vertex[j] == oracle::nearest(target, fitted[j]).second);
    }
    SUBCASE("empty input is rejected") {
        CHECK_THROWS_AS(per_vertex_error({}, {{0, 0, 0}}), EmptyInput);
    }
}

TEST_CASE("nrf converges immediately when the target is the mean") {
    const synth::Dataset ds = synth::make_dataset(4, 2, 21, 71);
    LearnOptions opt;
    opt.rounds = 30;
    const SlcModel model = learn_slc(ds.train, 8, opt);

    Mesh target = mesh_from_shape_vector(model.mean);
    const FitResult fit = nrf(model, target);
    CHECK(fit.iterations <= 2);
    CHECK(fit.converged);
    CHECK(fit.error_trace.back() < 1e-6);
}

TEST_CASE("nrf recovers an in-span shape resampled to a different vertex count") {
    const synth::Dataset ds = synth::make_dataset(6, 3, 49, 23);
    LearnOptions opt;
    opt.rounds = 40;
    opt.seed = 3;
    const SlcModel model = learn_slc(ds.train, 24, opt);

    // a small in-span deformation: scaled blend of training reconstructions
    const VecX alpha_true =
        0.25 * (model.directions.row(2) + model.directions.row(7)).transpose();
    const VecX shape = synthesize(model, alpha_true);
    Mesh surface = mesh_from_shape_vector(shape, ds.topology);

    Mesh target;
    target.vertices = synth::sample_surface(surface, 800000, 99);

    NrfParams params;
    params.tau_e = 1e-5;
    params.max_iter = 26;
    params.lambda = 0.5;
    const FitResult fit = nrf(model, target, params);

    // the loop's own error metric lives in the re-aligned target frame
    const auto aligned = apply_transform(target.vertices, fit.target_alignment);
    const auto rep = per_vertex_error(fit.shape, aligned);
    CHECK(rep.mean < 0.1);
    const double hausdorff = *std::max_element(rep.per_vertex.begin(), rep.per_vertex.end());
    CHECK(hausdorff < 0.5);

    // the error trace decreases strictly until the stopping iteration
    for (std::size_t i = 1; i + 1 < fit.error_trace.size(); ++i)
        CHECK(fit.error_trace[i] < fit.error_trace[i - 1]);
}
