// Morphable-model containers: the learned sparse model, the PCA baseline,
// and the registered training set they are built from. All matrices use
// the linearized 3m coordinate convention of shape_vector().
#pragma once

#include <vector>

#include "slc/mesh.hpp"

namespace slc {

// N registered shapes sharing one topology. Shape i lives in column i of
// callers' matrices; here they are kept as individual vectors.
struct TrainingSet {
    std::vector<VecX> shapes; // each of dimension 3m
    std::vector<Face> topology;
    int m = 0; // vertex count
    int N = 0; // scan count

    void validate() const {
        if (N < 2 || static_cast<int>(shapes.size()) != N)
            throw DimensionMismatch("training set needs at least 2 shapes");
        for (const auto& s : shapes)
            if (s.size() != 3 * static_cast<Eigen::Index>(m))
                throw DimensionMismatch("training shapes have mixed dimensions");
    }
};

// The learned sparse model. `basis` holds the deformation components as
// columns (3m x k); `directions` holds the per-scan motion patterns (N x k);
// `weights` is the average contribution of each direction, used to balance
// the regularizer when fitting.
struct SlcModel {
    VecX mean;       // 3m
    MatX basis;      // 3m x k, entrywise >= 0
    MatX directions; // N x k, entrywise >= 0
    VecX weights;    // k, column means of directions
    int k = 0;
    double lambda1 = 0.0; // hyperparameters used at training (not serialized)
    double lambda2 = 0.0;

    int vertex_count() const { return static_cast<int>(mean.size() / 3); }

    void validate() const {
        if (basis.cols() != k || directions.cols() != k || weights.size() != k)
            throw DimensionMismatch("model component counts disagree");
        if (basis.rows() != mean.size())
            throw DimensionMismatch("basis row count != mean dimension");
        if ((basis.array() < 0.0).any() || (directions.array() < 0.0).any())
            throw DimensionMismatch("model violates nonnegativity");
        for (Eigen::Index j = 0; j < weights.size(); ++j) {
            if (!(weights[j] >= 0.0))
                throw DimensionMismatch("model weights must be finite and >= 0");
            const double col_mean = directions.col(j).mean();
            if (std::abs(weights[j] - col_mean) > 1e-9 * std::max(1.0, col_mean))
                throw DimensionMismatch("weight " + std::to_string(j) +
                                        " is not the mean of its direction column");
        }
    }
};

struct PcaModel {
    VecX mean;        // 3m
    MatX basis;       // 3m x k, orthonormal columns
    VecX eigenvalues; // k, non-increasing, >= 0

    int component_count() const { return static_cast<int>(basis.cols()); }
};

// Linear synthesis: mean + basis * alpha.
inline VecX synthesize(const VecX& mean, const MatX& basis, const VecX& alpha) {
    if (alpha.size() != basis.cols())
        throw DimensionMismatch("coefficient vector length != component count");
    return mean + basis * alpha;
}

inline VecX synthesize(const SlcModel& model, const VecX& alpha) {
    return synthesize(model.mean, model.basis, alpha);
}

inline VecX synthesize(const PcaModel& model, const VecX& alpha) {
    return synthesize(model.mean, model.basis, alpha);
}

} // namespace slc
