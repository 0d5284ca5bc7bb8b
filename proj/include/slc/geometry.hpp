// Preprocessing and rigid alignment: nose-tip detection, spherical crop,
// rigid ICP, the closed-form similarity transform used inside the fitting
// loop, and the exact k-d tree behind every nearest-neighbor search.
#pragma once

#include <vector>

#include "slc/mesh.hpp"

namespace slc {

// Row-vector convention throughout: out = in * P + T.
struct SimilarityTransform {
    Mat3 P = Mat3::Identity();
    Vec3 T = Vec3::Zero(); // 1x3 translation

    Vec3 apply(const Vec3& p) const { return P.transpose() * p + T; }

    // Composition: apply `this`, then `next`.
    SimilarityTransform then(const SimilarityTransform& next) const {
        SimilarityTransform out;
        out.P = P * next.P;
        out.T = next.P.transpose() * T + next.T;
        return out;
    }

    static SimilarityTransform identity() { return {}; }
    static SimilarityTransform translation(const Vec3& t) { return {Mat3::Identity(), t}; }
};

std::vector<Vec3> apply_transform(const std::vector<Vec3>& points,
                                  const SimilarityTransform& transform);

// Immutable k-d tree over a point set. Searches are exact: results equal a
// brute-force scan, including the tie-break (smaller distance first, then
// smaller point index). Safe for concurrent queries once built.
class SpatialIndex {
public:
    explicit SpatialIndex(std::vector<Vec3> points);

    struct Hit {
        int index;
        double distance;
    };

    Hit nearest(const Vec3& query) const;
    // k hits sorted by (distance, index); fewer if the set is smaller than k.
    std::vector<Hit> knearest(const Vec3& query, int k) const;

    int size() const { return static_cast<int>(points_.size()); }
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int point;
        int axis;
        int left = -1;
        int right = -1;
    };
    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    int root_ = -1;

    int build(std::vector<int>& order, int lo, int hi, int depth);
};

// Index of the vertex with the largest z coordinate (ties: lowest index).
// The stated heuristic for locating the nose tip on a frontal scan.
int nose_tip(const Mesh& mesh);

struct CropResult {
    Mesh mesh;
    std::vector<int> kept; // kept[i] = original index of new vertex i
    Vec3 offset;           // translation applied after cropping
};

// Keeps vertices within `radius` (inclusive) of the nose tip and translates
// the survivors so their barycenter is at the origin. Faces touching removed
// vertices are dropped; face and landmark indices are remapped.
CropResult crop_and_center_detail(const Mesh& mesh, double radius);
Mesh crop_and_center(const Mesh& mesh, double radius);

// Rotation+translation (det(R)=+1, unit scale) minimizing the summed squared
// distance between corresponding points. Throws DegenerateConfiguration for
// fewer than 3 points or a rank-deficient cross-covariance.
SimilarityTransform orthogonal_procrustes(const std::vector<Vec3>& source,
                                          const std::vector<Vec3>& target);

struct RigidIcpResult {
    SimilarityTransform transform; // maps source onto target
    std::vector<double> rms_trace; // RMS nearest-neighbor error per iteration
};

// Point-to-point ICP: alternate nearest-neighbor assignment with the SVD
// Procrustes solve until the RMS improvement drops below `tol` (mm) or
// `max_iter` is reached. The RMS trace is non-increasing.
RigidIcpResult rigid_icp(const Mesh& source, const Mesh& target, int max_iter = 50,
                         double tol = 1e-9);

// Closed-form least-squares estimate of the transform mapping
// `reindexed_target` onto `template_points` under index correspondence:
// P minimizes ||template - target*P||^2, T aligns the barycenters.
SimilarityTransform estimate_similarity(const std::vector<Vec3>& template_points,
                                        const std::vector<Vec3>& reindexed_target);

struct PreprocessedTarget {
    Mesh mesh;             // cropped and rigidly aligned target
    std::vector<int> kept; // original index per surviving vertex
    SimilarityTransform transform; // raw target -> aligned frame
};

// The standard initialization: crop at the target's nose tip, zero-center,
// translate the nose tips onto each other, then refine with rigid ICP
// against the reference shape (normally the model mean).
PreprocessedTarget preprocess_target(const Mesh& target, const std::vector<Vec3>& reference,
                                     double crop_radius, int icp_max_iter = 50,
                                     double icp_tol = 1e-6);

} // namespace slc
