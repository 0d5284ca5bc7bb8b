// Learning the sparse, locally coherent deformation components.
//
// The training matrix is re-read per coordinate: every one of the 3m vertex
// coordinates contributes an N-dimensional sample (its displacement across
// the N scans). Those samples are factorized into nonnegative primary
// directions D (N x k) and nonnegative sparse expansion coefficients
// C (k x 3m) by minimizing, per sample i,
//
//     ||v'_i - D c_i||^2 + lambda1 ||c_i||_1 + lambda2 ||c_i||^2
//
// averaged over the 3m samples. C transposed becomes the deformation basis.
#pragma once

#include <cstdint>
#include <vector>

#include "slc/model.hpp"

namespace slc {

// Arithmetic mean of the shapes plus the displacement matrix V (3m x N):
// column i holds shape_i - mean.
std::pair<VecX, MatX> build_displacements(const TrainingSet& ts);

struct FactorizeOptions {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int rounds = 100;         // alternating D/C rounds
    int coord_passes = 8;     // coordinate-descent sweeps per C column
    double rel_tol = 1e-6;    // early stop on relative objective decrease
    std::uint64_t seed = 0;
    bool nonnegative = true;  // diagnostic mode only: false drops the
                              // positivity and unit-ball constraints
};

struct FactorizeResult {
    MatX directions;   // N x k
    MatX coefficients; // k x 3m
    std::vector<double> objective_trace; // evaluated after each round
};

// The alternating solver. `samples` is V' = V^T (N x 3m). Each round runs
// a C-step (per-column coordinate descent, parallel over columns, results
// independent of thread count) and a D-step (exact per-column block solve,
// columns clipped to >= 0 and projected onto the unit ball). Dead atoms are
// re-seeded from the worst-reconstructed sample once per round.
FactorizeResult factorize(const MatX& samples, int k, const FactorizeOptions& options);

struct LearnOptions {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int rounds = 100;
    double rel_tol = 1e-6;
    std::uint64_t seed = 0;
};

SlcModel learn_slc(const TrainingSet& ts, int k, const LearnOptions& options = {});

// Fraction of exactly-zero entries in the deformation basis.
double sparsity(const SlcModel& model);

// Standard PCA baseline: top-k eigenvectors of the displacement covariance
// via SVD of V, eigenvalues = squared singular values / (N-1).
PcaModel learn_pca(const TrainingSet& ts, int k);

// Objective of a given factorization, the quantity the solver reports
// per round: (1/n) * (||V' - D C||_F^2 + l1*sum|C| + l2*||C||_F^2).
double factorize_objective(const MatX& samples, const MatX& directions, const MatX& coefficients,
                           double lambda1, double lambda2);

// Builds a TrainingSet from registered meshes (equal vertex counts and
// shared topology required).
TrainingSet training_set_from_meshes(const std::vector<Mesh>& meshes);

// Restricts a model to the vertices within `radius` of its mean's nose tip.
// Supports the optional template-cropping mode of the fitting pipeline.
SlcModel crop_model(const SlcModel& model, double radius);

// Components with nonzero support at a control vertex, in index order.
// Applying only these components deforms the surrounding region while the
// rest of the shape stays fixed.
std::vector<int> active_components(const SlcModel& model, int vertex_index);

} // namespace slc
