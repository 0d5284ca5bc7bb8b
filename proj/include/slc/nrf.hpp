// Non-rigid fitting: point-to-point correspondence via Voronoi mean-point
// association with dynamic outlier rejection, the closed-form regularized
// deformation solve, and the iterative fitting loop tying them together
// with the similarity re-alignment from geometry.
#pragma once

#include <vector>

#include "slc/geometry.hpp"
#include "slc/model.hpp"

namespace slc {

// How a template vertex obtained its target point.
enum class AssignmentKind : std::uint8_t {
    Centroid,   // mean of its surviving Voronoi region
    FallbackNN, // region empty or fully rejected: nearest target point
};

struct Correspondence {
    std::vector<Vec3> targets;            // one target point per template vertex
    std::vector<AssignmentKind> kinds;    // per template vertex
    std::vector<int> region_sizes;        // surviving points per Centroid, 0 for fallback
    int rejected_count = 0;               // target points discarded as outliers
    double tau_global = 0.0;              // the global rejection threshold used
    std::vector<std::vector<int>> regions; // Voronoi membership before rejection
    std::vector<double> tau_local;         // per-region threshold, 0 for empty regions
};

// Mean-point association. For each target point the nearest template
// vertex defines its Voronoi region; each nonempty region is reduced to the
// centroid of its inliers under the global threshold (mean + population std
// of the template->target NN distances) and the analogous per-region local
// threshold, both with an inclusive boundary. Template vertices left without
// a centroid fall back to their nearest neighbor among all target points.
// Deterministic: nearest-neighbor ties break toward the lowest index.
Correspondence correspond(const std::vector<Vec3>& template_points,
                          const std::vector<Vec3>& target_points);

// Closed-form minimizer of ||X - basis*alpha||^2 + lambda * sum_j alpha_j^2 / mu_j
// with X the linearized difference between assigned targets and the current
// shape. Weights are floored at 1e-8 before inversion. Throws SingularSystem
// when lambda == 0 leaves the normal matrix rank-deficient.
VecX solve_deformation(const Correspondence& correspondence, const std::vector<Vec3>& current,
                       const SlcModel& model, double lambda);

struct NrfParams {
    double tau_e = 0.01; // mm, minimum per-iteration improvement
    int max_iter = 30;
    double lambda = 1.0;
};

struct FitResult {
    std::vector<Vec3> shape;        // deformed model, m vertices
    std::vector<VecX> alpha;        // per-iteration deformation increments
    std::vector<double> error_trace; // mean NN error per iteration (mm)
    int iterations = 0;
    bool converged = false; // stop was triggered by 0 <= delta_e <= tau_e
    SimilarityTransform target_alignment; // extra transform applied to the
                                          // target during the loop
};

// The fitting loop: correspond -> similarity re-alignment of both the
// re-indexed and the full target -> deformation solve -> shape update,
// stopping when the error improvement drops to tau_e, turns negative, or
// max_iter is reached. The target is expected to be cropped and coarsely
// aligned to the model mean already.
FitResult nrf(const SlcModel& model, const Mesh& target, const NrfParams& params = {});

struct VertexErrorReport {
    double mean = 0.0;
    std::vector<double> per_vertex;
};

// Distance from each fitted vertex to its nearest neighbor in the target.
VertexErrorReport per_vertex_error(const std::vector<Vec3>& fitted,
                                   const std::vector<Vec3>& target);

} // namespace slc
