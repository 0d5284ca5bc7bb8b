#include "slc/nrf.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "slc/parallel.hpp"

namespace slc {

namespace {

// mean + population standard deviation, accumulated in index order so the
// brute-force reference reproduces it bit for bit
double mean_plus_std(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values)
        sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (double v : values)
        sq += (v - mean) * (v - mean);
    return mean + std::sqrt(sq / n);
}

inline double point_distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

} // namespace

Correspondence correspond(const std::vector<Vec3>& template_points,
                          const std::vector<Vec3>& target_points) {
    if (template_points.empty() || target_points.empty())
        throw EmptyInput("correspond needs nonempty template and target");
    const int m = static_cast<int>(template_points.size());
    const int n = static_cast<int>(target_points.size());

    SpatialIndex template_index(template_points);
    SpatialIndex target_index(target_points);

    // Voronoi regions: target point -> nearest template vertex. The queries
    // run in parallel; region lists are assembled sequentially so membership
    // order (ascending target index) is independent of the thread count.
    std::vector<int> nn_of_target(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        nn_of_target[i] = template_index.nearest(target_points[i]).index;
    });
    std::vector<std::vector<int>> regions(m);
    for (int i = 0; i < n; ++i)
        regions[nn_of_target[i]].push_back(i);

    // global threshold from the template->target NN distances
    std::vector<double> nn_dist(m);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
        nn_dist[j] = target_index.nearest(template_points[j]).distance;
    });
    const double tau_g = mean_plus_std(nn_dist);

    Correspondence out;
    out.targets.assign(m, Vec3::Zero());
    out.kinds.assign(m, AssignmentKind::FallbackNN);
    out.region_sizes.assign(m, 0);
    out.tau_global = tau_g;
    out.tau_local.assign(m, 0.0);

    // per-region work is independent; every slot written is per-j
    std::vector<int> rejected_per_region(m, 0);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
        const auto& region = regions[j];
        if (region.empty())
            return;
        std::vector<double> dist(region.size());
        for (std::size_t r = 0; r < region.size(); ++r)
            dist[r] = point_distance(template_points[j], target_points[region[r]]);
        const double tau_j = mean_plus_std(dist);
        out.tau_local[j] = tau_j;

        Vec3 centroid = Vec3::Zero();
        int survivors = 0;
        for (std::size_t r = 0; r < region.size(); ++r) {
            if (dist[r] <= tau_g && dist[r] <= tau_j) {
                centroid += target_points[region[r]];
                ++survivors;
            }
        }
        rejected_per_region[j] = static_cast<int>(region.size()) - survivors;
        if (survivors > 0) {
            out.targets[j] = centroid / static_cast<double>(survivors);
            out.kinds[j] = AssignmentKind::Centroid;
            out.region_sizes[j] = survivors;
        }
    });

    for (int j = 0; j < m; ++j) {
        out.rejected_count += rejected_per_region[j];
        if (out.kinds[j] == AssignmentKind::FallbackNN) {
            const auto hit = target_index.nearest(template_points[j]);
            out.targets[j] = target_points[hit.index];
            out.region_sizes[j] = 0;
        }
    }
    out.regions = std::move(regions);
    return out;
}

VecX solve_deformation(const Correspondence& correspondence, const std::vector<Vec3>& current,
                       const SlcModel& model, double lambda) {
    if (lambda < 0.0)
        throw InvalidHyperparam("lambda must be >= 0");
    const auto m = current.size();
    if (correspondence.targets.size() != m)
        throw DimensionMismatch("correspondence does not cover the current shape");
    if (static_cast<Eigen::Index>(3 * m) != model.basis.rows())
        throw DimensionMismatch("shape dimension does not match the model basis");

    VecX x(3 * m);
    for (std::size_t j = 0; j < m; ++j)
        x.segment<3>(3 * j) = correspondence.targets[j] - current[j];

    MatX normal = model.basis.transpose() * model.basis;
    if (lambda > 0.0) {
        for (int j = 0; j < model.k; ++j)
            normal(j, j) += lambda / std::max(model.weights[j], 1e-8);
    }
    Eigen::LDLT<MatX> ldlt(normal);
    if (ldlt.info() != Eigen::Success)
        throw SingularSystem("deformation normal matrix is not solvable");
    if (lambda == 0.0) {
        // LDLT tolerates semi-definite input; detect rank deficiency explicitly
        const VecX d = ldlt.vectorD();
        const double dmax = d.maxCoeff();
        if (dmax <= 0.0 || d.minCoeff() <= 1e-12 * dmax)
            throw SingularSystem("basis gram matrix is rank-deficient and lambda is 0");
    }
    return ldlt.solve(model.basis.transpose() * x);
}

FitResult nrf(const SlcModel& model, const Mesh& target, const NrfParams& params) {
    if (target.vertices.empty())
        throw EmptyInput("nrf needs a nonempty target");
    model.validate();

    std::vector<Vec3> shape = points_from_shape_vector(model.mean);
    std::vector<Vec3> aligned_target = target.vertices;

    FitResult result;
    double err = per_vertex_error(shape, aligned_target).mean;

    for (int i = 0; i < params.max_iter; ++i) {
        Correspondence corr = correspond(shape, aligned_target);

        // re-align both the re-indexed and the full target onto the shape
        const SimilarityTransform sim = estimate_similarity(shape, corr.targets);
        corr.targets = apply_transform(corr.targets, sim);
        aligned_target = apply_transform(aligned_target, sim);
        result.target_alignment = result.target_alignment.then(sim);

        const VecX alpha = solve_deformation(corr, shape, model, params.lambda);
        for (std::size_t j = 0; j < shape.size(); ++j)
            shape[j] += model.basis.middleRows(3 * static_cast<Eigen::Index>(j), 3) * alpha;
        result.alpha.push_back(alpha);

        const double e = per_vertex_error(shape, aligned_target).mean;
        result.error_trace.push_back(e);
        result.iterations = i + 1;

        const double delta = err - e;
        err = e;
        if (delta <= params.tau_e) {
            // a materially negative delta means the error increased and the
            // fit stopped without converging; tiny negatives are fp noise
            result.converged = delta >= -1e-12 * std::max(1.0, e);
            break;
        }
    }
    result.shape = std::move(shape);
    return result;
}

VertexErrorReport per_vertex_error(const std::vector<Vec3>& fitted,
                                   const std::vector<Vec3>& target) {
    if (fitted.empty() || target.empty())
        throw EmptyInput("per_vertex_error needs nonempty point sets");
    SpatialIndex index(target);
    VertexErrorReport report;
    report.per_vertex.resize(fitted.size());
    parallel_for(fitted.size(), [&](std::size_t j) {
        report.per_vertex[j] = index.nearest(fitted[j]).distance;
    });
    double sum = 0.0;
    for (double d : report.per_vertex)
        sum += d;
    report.mean = sum / static_cast<double>(fitted.size());
    return report;
}

} // namespace slc
