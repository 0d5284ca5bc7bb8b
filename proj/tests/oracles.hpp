// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written as plain loops against the
// definitions, separate from the production code paths it validates.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "slc/mesh.hpp"
#include "slc/nrf.hpp"
#include "slc/rng.hpp"

namespace oracle {

using slc::MatX;
using slc::Vec3;
using slc::VecX;

inline double dist(const Vec3& a, const Vec3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// nearest neighbor by linear scan, ties to the lowest index
inline std::pair<int, double> nearest(const std::vector<Vec3>& points, const Vec3& query) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = dist(points[i], query);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return {best, best_d};
}

// k nearest by full sort under (distance, index)
inline std::vector<std::pair<int, double>> knearest(const std::vector<Vec3>& points,
                                                    const Vec3& query, int k) {
    std::vector<std::pair<double, int>> all;
    all.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        all.emplace_back(dist(points[i], query), static_cast<int>(i));
    std::sort(all.begin(), all.end());
    std::vector<std::pair<int, double>> out;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(all.size())); ++i)
        out.emplace_back(all[i].second, all[i].first);
    return out;
}

inline double mean_plus_population_std(const std::vector<double>& values) {
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

struct CorrespondRef {
    std::vector<Vec3> targets;
    std::vector<bool> is_centroid;
    std::vector<int> region_sizes;
    std::vector<std::vector<int>> regions;
    std::vector<double> tau_local;
    double tau_global = 0.0;
    int rejected = 0;
};

// O(n*m) reference of the mean-point association with global/local outlier
// rejection and nearest-neighbor completion.
inline CorrespondRef correspond_reference(const std::vector<Vec3>& tmpl,
                                          const std::vector<Vec3>& target) {
    const int m = static_cast<int>(tmpl.size());
    const int n = static_cast<int>(target.size());
    CorrespondRef ref;
    ref.targets.assign(m, Vec3::Zero());
    ref.is_centroid.assign(m, false);
    ref.region_sizes.assign(m, 0);
    ref.regions.assign(m, {});
    ref.tau_local.assign(m, 0.0);

    for (int i = 0; i < n; ++i) {
        int best = 0;
        double best_d = dist(tmpl[0], target[i]);
        for (int j = 1; j < m; ++j) {
            const double d = dist(tmpl[j], target[i]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        ref.regions[best].push_back(i);
    }

    std::vector<double> nn(m);
    for (int j = 0; j < m; ++j) {
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            best_d = std::min(best_d, dist(tmpl[j], target[i]));
        nn[j] = best_d;
    }
    ref.tau_global = mean_plus_population_std(nn);

    for (int j = 0; j < m; ++j) {
        if (ref.regions[j].empty())
            continue;
        std::vector<double> d(ref.regions[j].size());
        for (std::size_t r = 0; r < d.size(); ++r)
            d[r] = dist(tmpl[j], target[ref.regions[j][r]]);
        const double tau_j = mean_plus_population_std(d);
        ref.tau_local[j] = tau_j;
        Vec3 centroid = Vec3::Zero();
        int kept = 0;
        for (std::size_t r = 0; r < d.size(); ++r) {
            if (d[r] <= ref.tau_global && d[r] <= tau_j) {
                centroid += target[ref.regions[j][r]];
                ++kept;
            }
        }
        ref.rejected += static_cast<int>(d.size()) - kept;
        if (kept > 0) {
            ref.targets[j] = centroid / static_cast<double>(kept);
            ref.is_centroid[j] = true;
            ref.region_sizes[j] = kept;
        }
    }
    for (int j = 0; j < m; ++j) {
        if (ref.is_centroid[j])
            continue;
        const auto [idx, d] = nearest(target, tmpl[j]);
        ref.targets[j] = target[idx];
    }
    return ref;
}

// steepest descent with exact line search on
//   0.5 a' H a - b' a,  H = C'C + lambda diag(1/mu), b = C'x
inline VecX quadratic_descent(const MatX& basis, const VecX& x, const VecX& mu, double lambda,
                              int max_iter = 200000, double tol = 1e-14) {
    const MatX H = basis.transpose() * basis +
                   MatX((lambda * mu.cwiseMax(1e-8).cwiseInverse()).asDiagonal());
    const VecX b = basis.transpose() * x;
    VecX a = VecX::Zero(basis.cols());
    const double bnorm = std::max(b.norm(), 1e-300);
    for (int it = 0; it < max_iter; ++it) {
        const VecX g = H * a - b;
        if (g.norm() <= tol * bnorm)
            break;
        const double gg = g.squaredNorm();
        const double gHg = g.dot(H * g);
        if (gHg <= 0.0)
            break;
        a -= (gg / gHg) * g;
    }
    return a;
}

// E-maxx style Hungarian algorithm; cost is n_rows x n_cols with
// n_rows <= n_cols. Returns the optimal total cost.
inline double hungarian(const std::vector<std::vector<double>>& cost,
                        std::vector<int>* assignment_out = nullptr) {
    const int n = static_cast<int>(cost.size());
    const int m = static_cast<int>(cost[0].size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[j])
                    continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0)
            row_to_col[p[j] - 1] = j - 1;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        total += cost[i][row_to_col[i]];
    if (assignment_out)
        *assignment_out = std::move(row_to_col);
    return total;
}

// helpers for randomized fixtures

inline std::vector<Vec3> random_points(slc::Rng& rng, int n, double scale = 100.0) {
    std::vector<Vec3> out(n);
    for (auto& p : out)
        p = Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                 rng.uniform(-scale, scale));
    return out;
}

inline slc::Mat3 random_rotation(slc::Rng& rng, double max_angle_rad) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const double angle = max_angle_rad * rng.uniform();
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

} // namespace oracle
