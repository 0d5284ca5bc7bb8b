// Synthetic parametric face-like meshes with known ground truth: dense
// correspondence by construction, deterministic landmarks, known expression
// support regions, and provenance maps under degradation. This is the
// oracle substrate for every end-to-end test.
#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "slc/mesh.hpp"
#include "slc/model.hpp"

namespace slc::synth {

struct FaceSpec {
    // identity: mild global radii plus local structural features, so that
    // identity variation is dominated by localized, independently varying
    // regions rather than whole-face scalings
    double radius_x = 80.0; // ellipsoid radii (mm)
    double radius_y = 80.0;
    double radius_z = 50.0;
    double nose_amp = 10.0;   // nose bump height (mm)
    double nose_width = 0.14; // bump radius in grid units
    double jaw_width = 0.0;   // widening factor of the lower face
    double eye_depth = 2.5;   // eye-socket depression (mm)
    double chin_amp = 2.0;    // chin bump (mm)
    double cheek_amp_l = 1.5; // cheekbone bumps (mm)
    double cheek_amp_r = 1.5;
    // structural placement offsets (grid units); shifting a feature is a
    // strongly nonlinear shape change, unlike pure amplitude scaling
    double eye_height = 0.0;  // vertical offset of both eye sockets
    double eye_sep = 0.0;     // half-change of the eye separation
    double cheek_height = 0.0;
    double cheek_sep = 0.0;
    double chin_du = 0.0;
    double chin_dv = 0.0;
    // per-identity surface detail: amplitudes (mm) of small bumps at fixed
    // positions on two rings around the face, independent across identities
    std::array<double, 24> detail_amps{};
    // expression
    double mouth_open = 0.0; // mm
    double smile = 0.0;      // mouth-corner curl (mm)
    double brow_raise = 0.0; // mm
    // sampling
    int res_u = 49;
    int res_v = 49;
    std::uint64_t seed = 0;

    void validate() const;
};

// Height field over an ellipsoid cap restricted to the unit disk of the
// parameter grid. Identical specs produce bitwise-identical meshes, and all
// meshes of one resolution share topology and landmark indices. Landmarks:
// nose_tip (the max-z vertex by construction), mouth_corner_l/r,
// eye_corner_l/r, chin.
Mesh generate(const FaceSpec& spec);

// Grid coordinates (iu, iv) of each generated vertex; pure function of the
// resolution. Two vertices are grid neighbors when both deltas are <= 1.
std::vector<std::pair<int, int>> grid_coordinates(int res_u, int res_v);

// Vertices that any expression parameter can displace (union of the mouth,
// mouth-corner, and brow supports).
std::vector<int> expression_mask(int res_u, int res_v);

struct Degraded {
    Mesh mesh;
    std::vector<int> provenance; // kept vertex -> original vertex index
};

// Gaussian vertex noise plus random subsampling to exactly
// round(keep_fraction * n) vertices (original order preserved). Faces are
// dropped when keep_fraction < 1; landmarks are remapped or dropped.
Degraded degrade(const Mesh& mesh, double noise_sigma, double keep_fraction,
                 std::uint64_t seed);

// n points drawn uniformly by area from the mesh triangles; used to
// resample a surface to an arbitrary density.
std::vector<Vec3> sample_surface(const Mesh& mesh, int n_points, std::uint64_t seed);

struct Dataset {
    TrainingSet train;
    TrainingSet test; // identity-disjoint from train
    std::vector<FaceSpec> train_specs, test_specs;
    std::vector<int> train_identity, test_identity;     // identity id per shape
    std::vector<int> train_expression, test_expression; // expression id per shape
    LandmarkMap landmarks;       // shared across all meshes of the dataset
    std::vector<Face> topology;  // shared triangulation
    std::vector<int> expression_region; // vertices expressions may move
};

// n_identities training identities (x n_expressions each) plus a held-out
// test split of max(1, n_identities/4) further identities. Expression 0 is
// neutral; later ones draw random mouth/smile/brow amplitudes. Fully
// deterministic in `seed`.
Dataset make_dataset(int n_identities, int n_expressions, int resolution, std::uint64_t seed);

} // namespace slc::synth
