#include "slc/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slc {

namespace {

// Squared distance with a fixed evaluation order so k-d tree hits are
// bitwise identical to a brute-force scan.
inline double sqdist(const Vec3& a, const Vec3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

} // namespace

std::vector<Vec3> apply_transform(const std::vector<Vec3>& points,
                                  const SimilarityTransform& transform) {
    std::vector<Vec3> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = transform.apply(points[i]);
    return out;
}

// ----------------------------------------------------------- SpatialIndex

SpatialIndex::SpatialIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty())
        throw EmptyInput("cannot index an empty point set");
    std::vector<int> order(points_.size());
    std::iota(order.begin(), order.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(order, 0, static_cast<int>(order.size()), 0);
}

int SpatialIndex::build(std::vector<int>& order, int lo, int hi, int depth) {
    if (lo >= hi)
        return -1;
    const int axis = depth % 3;
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                     [&](int a, int b) {
                         const double ca = points_[a][axis], cb = points_[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order[mid], axis, -1, -1});
    const int left = build(order, lo, mid, depth + 1);
    const int right = build(order, mid + 1, hi, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

SpatialIndex::Hit SpatialIndex::nearest(const Vec3& query) const {
    double best_sq = std::numeric_limits<double>::infinity();
    int best_idx = -1;

    // iterative traversal with an explicit stack
    struct Frame {
        int node;
    };
    std::vector<Frame> stack;
    stack.push_back({root_});
    while (!stack.empty()) {
        const int ni = stack.back().node;
        stack.pop_back();
        if (ni < 0)
            continue;
        const Node& node = nodes_[ni];
        const Vec3& p = points_[node.point];
        const double d = sqdist(query, p);
        if (d < best_sq || (d == best_sq && node.point < best_idx)) {
            best_sq = d;
            best_idx = node.point;
        }
        const double diff = query[node.axis] - p[node.axis];
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        // visit the far side unless it is strictly outside the best radius;
        // equal-distance candidates must stay reachable for the index tie-break
        if (far >= 0 && diff * diff <= best_sq)
            stack.push_back({far});
        if (near >= 0)
            stack.push_back({near});
    }
    return {best_idx, std::sqrt(best_sq)};
}

std::vector<SpatialIndex::Hit> SpatialIndex::knearest(const Vec3& query, int k) const {
    k = std::min<int>(k, static_cast<int>(points_.size()));
    if (k <= 0)
        return {};

    using Entry = std::pair<double, int>; // (squared distance, index)
    auto worse = [](const Entry& a, const Entry& b) {
        return a.first < b.first || (a.first == b.first && a.second < b.second);
    };
    std::vector<Entry> heap; // max-heap under `worse`
    heap.reserve(k + 1);

    std::vector<int> stack;
    stack.push_back(root_);
    while (!stack.empty()) {
        const int ni = stack.back();
        stack.pop_back();
        if (ni < 0)
            continue;
        const Node& node = nodes_[ni];
        const Vec3& p = points_[node.point];
        const Entry cand{sqdist(query, p), node.point};
        if (static_cast<int>(heap.size()) < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), worse);
        } else if (worse(cand, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), worse);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), worse);
        }
        const double diff = query[node.axis] - p[node.axis];
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        const bool full = static_cast<int>(heap.size()) >= k;
        if (far >= 0 && (!full || diff * diff <= heap.front().first))
            stack.push_back(far);
        if (near >= 0)
            stack.push_back(near);
    }

    std::sort(heap.begin(), heap.end(), worse);
    std::vector<Hit> out;
    out.reserve(heap.size());
    for (const auto& [sq, idx] : heap)
        out.push_back({idx, std::sqrt(sq)});
    return out;
}

// ------------------------------------------------------------- crop etc.

int nose_tip(const Mesh& mesh) {
    if (mesh.vertices.empty())
        throw EmptyInput("nose_tip on empty mesh");
    int best = 0;
    for (int i = 1; i < mesh.vertex_count(); ++i)
        if (mesh.vertices[i].z() > mesh.vertices[best].z())
            best = i;
    return best;
}

CropResult crop_and_center_detail(const Mesh& mesh, double radius) {
    const int tip = nose_tip(mesh);
    const Vec3 center = mesh.vertices[tip];

    CropResult out;
    std::vector<int> remap(mesh.vertices.size(), -1);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        if (std::sqrt(sqdist(mesh.vertices[i], center)) <= radius) {
            remap[i] = static_cast<int>(out.kept.size());
            out.kept.push_back(i);
            out.mesh.vertices.push_back(mesh.vertices[i]);
        }
    }
    if (out.mesh.vertices.empty())
        throw EmptyResult("no vertices within crop radius");

    Vec3 barycenter = Vec3::Zero();
    for (const auto& v : out.mesh.vertices)
        barycenter += v;
    barycenter /= static_cast<double>(out.mesh.vertices.size());
    for (auto& v : out.mesh.vertices)
        v -= barycenter;
    out.offset = -barycenter;

    for (const auto& f : mesh.faces) {
        if (remap[f[0]] >= 0 && remap[f[1]] >= 0 && remap[f[2]] >= 0)
            out.mesh.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
    }
    for (const auto& [name, idx] : mesh.landmarks)
        if (remap[idx] >= 0)
            out.mesh.landmarks[name] = remap[idx];
    return out;
}

Mesh crop_and_center(const Mesh& mesh, double radius) {
    return crop_and_center_detail(mesh, radius).mesh;
}

// -------------------------------------------------------------- alignment

SimilarityTransform orthogonal_procrustes(const std::vector<Vec3>& source,
                                          const std::vector<Vec3>& target) {
    if (source.size() != target.size())
        throw DimensionMismatch("procrustes point sets differ in size");
    const auto n = source.size();
    if (n < 3)
        throw DegenerateConfiguration("procrustes needs at least 3 correspondences");

    Vec3 sc = Vec3::Zero(), tc = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        sc += source[i];
        tc += target[i];
    }
    sc /= static_cast<double>(n);
    tc /= static_cast<double>(n);

    Mat3 H = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i)
        H += (source[i] - sc) * (target[i] - tc).transpose();

    Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    // rank < 2 (all points collinear) leaves the rotation underdetermined
    if (sv(1) <= 1e-12 * std::max(1.0, sv(0)))
        throw DegenerateConfiguration("rank-deficient cross-covariance in procrustes");

    Mat3 R = svd.matrixV() * svd.matrixU().transpose();
    if (R.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        R = svd.matrixV() * flip * svd.matrixU().transpose();
    }
    // column-vector solve q = R p + t, stored in row convention
    SimilarityTransform out;
    out.P = R.transpose();
    out.T = tc - R * sc;
    return out;
}

RigidIcpResult rigid_icp(const Mesh& source, const Mesh& target, int max_iter, double tol) {
    if (source.vertices.empty() || target.vertices.empty())
        throw EmptyInput("rigid_icp on empty mesh");

    SpatialIndex index(target.vertices);
    std::vector<Vec3> current = source.vertices;
    RigidIcpResult result;
    double prev_rms = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<Vec3> matched(current.size());
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < current.size(); ++i) {
            const auto hit = index.nearest(current[i]);
            matched[i] = target.vertices[hit.index];
            sum_sq += hit.distance * hit.distance;
        }
        const double rms = std::sqrt(sum_sq / static_cast<double>(current.size()));
        result.rms_trace.push_back(rms);
        if (prev_rms - rms < tol)
            break;
        prev_rms = rms;

        const SimilarityTransform step = orthogonal_procrustes(current, matched);
        current = apply_transform(current, step);
        result.transform = result.transform.then(step);
    }
    return result;
}

SimilarityTransform estimate_similarity(const std::vector<Vec3>& template_points,
                                        const std::vector<Vec3>& reindexed_target) {
    if (template_points.size() != reindexed_target.size())
        throw DimensionMismatch("similarity estimation needs corresponded sets");
    const auto n = template_points.size();
    if (n == 0)
        throw EmptyInput("similarity estimation on empty sets");

    Vec3 t_bar = Vec3::Zero(), s_bar = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        t_bar += reindexed_target[i];
        s_bar += template_points[i];
    }
    t_bar /= static_cast<double>(n);
    s_bar /= static_cast<double>(n);

    // P from the barycentered least squares (translation-free), T from the
    // barycenters; together they are the joint minimizer of the row-form
    // residual ||s - (t*P + 1*T)||_F
    MatX A(n, 3), B(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        A.row(i) = (reindexed_target[i] - t_bar).transpose();
        B.row(i) = (template_points[i] - s_bar).transpose();
    }

    Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VecX sv = svd.singularValues();
    // centered rank < 3 means the target points are affinely dependent
    if (sv.size() < 3 || sv(2) <= 1e-12 * std::max(1.0, sv(0)))
        throw DegenerateConfiguration("target points are affinely dependent");

    MatX inv_sv = sv.cwiseInverse().asDiagonal();
    Mat3 P = svd.matrixV() * inv_sv * svd.matrixU().transpose() * B;
    if (!P.allFinite() || std::abs(P.determinant()) <= 1e-15)
        throw DegenerateConfiguration("estimated transform is singular");

    SimilarityTransform out;
    out.P = P;
    out.T = s_bar - P.transpose() * t_bar;
    return out;
}

PreprocessedTarget preprocess_target(const Mesh& target, const std::vector<Vec3>& reference,
                                     double crop_radius, int icp_max_iter, double icp_tol) {
    if (reference.empty())
        throw EmptyInput("preprocess_target needs a reference shape");

    CropResult cropped = crop_and_center_detail(target, crop_radius);
    SimilarityTransform total = SimilarityTransform::translation(cropped.offset);

    // make the nose tips coincident before ICP
    Mesh ref_mesh;
    ref_mesh.vertices = reference;
    const Vec3 ref_tip = reference[nose_tip(ref_mesh)];
    const Vec3 cur_tip = cropped.mesh.vertices[nose_tip(cropped.mesh)];
    const SimilarityTransform shift = SimilarityTransform::translation(ref_tip - cur_tip);
    cropped.mesh.vertices = apply_transform(cropped.mesh.vertices, shift);
    total = total.then(shift);

    const RigidIcpResult icp = rigid_icp(cropped.mesh, ref_mesh, icp_max_iter, icp_tol);
    cropped.mesh.vertices = apply_transform(cropped.mesh.vertices, icp.transform);
    total = total.then(icp.transform);

    return {std::move(cropped.mesh), std::move(cropped.kept), total};
}

} // namespace slc
