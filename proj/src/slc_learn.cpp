#include "slc/slc_learn.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "slc/geometry.hpp"
#include "slc/parallel.hpp"
#include "slc/rng.hpp"

namespace slc {

std::pair<VecX, MatX> build_displacements(const TrainingSet& ts) {
    ts.validate();
    const Eigen::Index dim = ts.shapes[0].size();
    VecX mean = VecX::Zero(dim);
    for (const auto& s : ts.shapes)
        mean += s;
    mean /= static_cast<double>(ts.N);

    MatX V(dim, ts.N);
    for (int i = 0; i < ts.N; ++i)
        V.col(i) = ts.shapes[i] - mean;
    return {std::move(mean), std::move(V)};
}

double factorize_objective(const MatX& samples, const MatX& directions, const MatX& coefficients,
                           double lambda1, double lambda2) {
    const double fit = (samples - directions * coefficients).squaredNorm();
    const double l1 = coefficients.cwiseAbs().sum();
    const double l2 = coefficients.squaredNorm();
    return (fit + lambda1 * l1 + lambda2 * l2) / static_cast<double>(samples.cols());
}

namespace {

// One C column: min_{c} ||v - D c||^2 + l1 ||c||_1 + l2 ||c||^2, optionally
// subject to c >= 0, by cyclic coordinate descent. Each single-coordinate
// update is the exact 1-D minimizer, so the objective never increases.
void solve_coefficient_column(const MatX& D, const VecX& col_sq_norms, const VecX& v,
                              double lambda1, double lambda2, int passes, bool nonneg,
                              VecX& c) {
    const Eigen::Index k = D.cols();
    VecX residual = v - D * c;
    for (int pass = 0; pass < passes; ++pass) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double denom = col_sq_norms[j] + lambda2;
            if (denom <= 0.0)
                continue;
            const double old = c[j];
            const double rho = D.col(j).dot(residual) + col_sq_norms[j] * old;
            double next;
            if (nonneg) {
                next = std::max(0.0, (rho - 0.5 * lambda1) / denom);
            } else {
                // two-sided soft threshold
                if (rho > 0.5 * lambda1)
                    next = (rho - 0.5 * lambda1) / denom;
                else if (rho < -0.5 * lambda1)
                    next = (rho + 0.5 * lambda1) / denom;
                else
                    next = 0.0;
            }
            if (next != old) {
                residual -= (next - old) * D.col(j);
                c[j] = next;
                change = std::max(change, std::abs(next - old));
            }
        }
        if (change == 0.0)
            break;
    }
}

// Exact per-column D update. With C fixed and the other columns held, the
// column subproblem is an isotropic quadratic, so clipping to >= 0 and then
// scaling into the unit ball is the exact constrained minimizer.
void update_directions(const MatX& samples, MatX& D, const MatX& C, bool nonneg) {
    const MatX gram = C * C.transpose();            // k x k
    const MatX cross = samples * C.transpose();     // N x k
    const Eigen::Index k = D.cols();
    for (Eigen::Index j = 0; j < k; ++j) {
        const double diag = gram(j, j);
        if (diag <= 0.0)
            continue; // dead row of C: leave the column as is
        VecX col = D.col(j) + (cross.col(j) - D * gram.col(j)) / diag;
        if (nonneg) {
            col = col.cwiseMax(0.0);
            const double norm = col.norm();
            if (norm > 1.0)
                col /= norm;
        }
        D.col(j) = col;
    }
}

void reseed_dead_atoms(const MatX& samples, MatX& D, MatX& C, Rng& rng, bool nonneg) {
    std::vector<Eigen::Index> dead;
    for (Eigen::Index j = 0; j < D.cols(); ++j)
        if (D.col(j).isZero(0.0))
            dead.push_back(j);
    if (dead.empty() || !nonneg)
        return;

    // residual norms per sample; re-seed each dead atom from a distinct
    // worst-reconstructed sample (the C row is zero, so the objective is
    // unchanged by the re-seed itself)
    const MatX residual = samples - D * C;
    std::vector<Eigen::Index> order(samples.cols());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + std::min(order.size(), dead.size()),
                      order.end(), [&](Eigen::Index a, Eigen::Index b) {
                          const double ra = residual.col(a).squaredNorm();
                          const double rb = residual.col(b).squaredNorm();
                          return ra > rb || (ra == rb && a < b);
                      });
    for (std::size_t d = 0; d < dead.size(); ++d) {
        const Eigen::Index j = dead[d];
        C.row(j).setZero();
        VecX seed = samples.col(order[d % order.size()]).cwiseAbs();
        if (seed.isZero(0.0))
            seed = VecX::Constant(D.rows(), 1.0 + rng.uniform());
        D.col(j) = seed / std::max(seed.norm(), 1e-300);
    }
}

} // namespace

FactorizeResult factorize(const MatX& samples, int k, const FactorizeOptions& options) {
    if (options.lambda1 < 0.0 || options.lambda2 < 0.0)
        throw InvalidHyperparam("lambda1/lambda2 must be >= 0");
    if (k < 1)
        throw InvalidHyperparam("component count must be >= 1");
    if (options.rounds < 1)
        throw InvalidHyperparam("at least one round required");

    const Eigen::Index N = samples.rows();
    const Eigen::Index n_samples = samples.cols();

    // data-driven init: k sample columns, entries made nonnegative
    Rng rng(Rng::mix(options.seed, 0x5ca1ab1e));
    MatX D(N, k);
    for (int j = 0; j < k; ++j) {
        VecX col = samples.col(static_cast<Eigen::Index>(rng.below(n_samples)));
        if (options.nonnegative)
            col = col.cwiseAbs();
        const double norm = col.norm();
        D.col(j) = norm > 0.0 ? VecX(col / norm) : VecX::Constant(N, 1.0 / std::sqrt(double(N)));
    }
    MatX C = MatX::Zero(k, n_samples);

    FactorizeResult result;
    result.objective_trace.reserve(options.rounds);
    double prev = std::numeric_limits<double>::infinity();

    for (int round = 0; round < options.rounds; ++round) {
        const VecX col_sq = D.colwise().squaredNorm().transpose();
        const bool plain_ls = !options.nonnegative && options.lambda1 == 0.0;
        if (plain_ls) {
            // diagnostic path: exact unconstrained (ridge) solve
            if (options.lambda2 > 0.0) {
                MatX gram = D.transpose() * D;
                gram.diagonal().array() += options.lambda2;
                C = gram.ldlt().solve(D.transpose() * samples);
            } else {
                C = D.completeOrthogonalDecomposition().solve(samples);
            }
        } else {
            parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
                VecX c = C.col(static_cast<Eigen::Index>(i));
                solve_coefficient_column(D, col_sq, samples.col(static_cast<Eigen::Index>(i)),
                                         options.lambda1, options.lambda2, options.coord_passes,
                                         options.nonnegative, c);
                C.col(static_cast<Eigen::Index>(i)) = c;
            });
        }

        update_directions(samples, D, C, options.nonnegative);
        reseed_dead_atoms(samples, D, C, rng, options.nonnegative);

        const double obj = factorize_objective(samples, D, C, options.lambda1, options.lambda2);
        result.objective_trace.push_back(obj);
        if (std::isfinite(prev) && prev - obj < options.rel_tol * std::max(prev, 1e-300))
            break;
        prev = obj;
    }

    result.directions = std::move(D);
    result.coefficients = std::move(C);
    return result;
}

SlcModel learn_slc(const TrainingSet& ts, int k, const LearnOptions& options) {
    auto [mean, V] = build_displacements(ts);
    const MatX samples = V.transpose(); // N x 3m

    FactorizeOptions fopt;
    fopt.lambda1 = options.lambda1;
    fopt.lambda2 = options.lambda2;
    fopt.rounds = options.rounds;
    fopt.rel_tol = options.rel_tol;
    fopt.seed = options.seed;
    FactorizeResult fact = factorize(samples, k, fopt);

    SlcModel model;
    model.mean = std::move(mean);
    model.basis = fact.coefficients.transpose(); // 3m x k
    model.directions = std::move(fact.directions);
    model.weights = model.directions.colwise().mean().transpose();
    model.k = k;
    model.lambda1 = options.lambda1;
    model.lambda2 = options.lambda2;
    model.validate();
    return model;
}

double sparsity(const SlcModel& model) {
    if (model.basis.size() == 0)
        return 1.0;
    const auto zeros = (model.basis.array() == 0.0).count();
    return static_cast<double>(zeros) / static_cast<double>(model.basis.size());
}

PcaModel learn_pca(const TrainingSet& ts, int k) {
    auto [mean, V] = build_displacements(ts);
    const int max_k = static_cast<int>(std::min<Eigen::Index>(V.rows(), ts.N - 1));
    if (k < 1 || k > max_k)
        throw KTooLarge("k must be in [1, " + std::to_string(max_k) + "]");

    Eigen::BDCSVD<MatX> svd(V, Eigen::ComputeThinU);
    PcaModel model;
    model.mean = std::move(mean);
    model.basis = svd.matrixU().leftCols(k);
    model.eigenvalues =
        svd.singularValues().head(k).array().square() / static_cast<double>(ts.N - 1);
    return model;
}

TrainingSet training_set_from_meshes(const std::vector<Mesh>& meshes) {
    if (meshes.size() < 2)
        throw DimensionMismatch("training set needs at least 2 meshes");
    TrainingSet ts;
    ts.m = meshes[0].vertex_count();
    ts.N = static_cast<int>(meshes.size());
    ts.topology = meshes[0].faces;
    ts.shapes.reserve(meshes.size());
    for (const auto& mesh : meshes) {
        if (mesh.vertex_count() != ts.m)
            throw DimensionMismatch("training meshes have different vertex counts");
        ts.shapes.push_back(shape_vector(mesh));
    }
    ts.validate();
    return ts;
}

std::vector<int> active_components(const SlcModel& model, int vertex_index) {
    if (vertex_index < 0 || vertex_index >= model.vertex_count())
        throw IndexError("control vertex " + std::to_string(vertex_index) + " out of range");
    std::vector<int> out;
    for (int j = 0; j < model.k; ++j)
        if (!model.basis.block<3, 1>(3 * vertex_index, j).isZero(0.0))
            out.push_back(j);
    return out;
}

SlcModel crop_model(const SlcModel& model, double radius) {
    Mesh mean_mesh = mesh_from_shape_vector(model.mean);
    const CropResult crop = crop_and_center_detail(mean_mesh, radius);

    SlcModel out;
    out.k = model.k;
    out.lambda1 = model.lambda1;
    out.lambda2 = model.lambda2;
    out.directions = model.directions;
    out.weights = model.weights;
    out.mean.resize(3 * crop.kept.size());
    out.basis.resize(3 * crop.kept.size(), model.k);
    for (std::size_t i = 0; i < crop.kept.size(); ++i) {
        const Eigen::Index src = 3 * crop.kept[i];
        out.mean.segment<3>(3 * i) = crop.mesh.vertices[i]; // already re-centered
        out.basis.middleRows(3 * static_cast<Eigen::Index>(i), 3) =
            model.basis.middleRows(src, 3);
    }
    out.validate();
    return out;
}

} // namespace slc
