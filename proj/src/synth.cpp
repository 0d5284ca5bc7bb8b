#include "slc/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "slc/rng.hpp"

namespace slc::synth {

namespace {

// C-infinity bump: 1 at t=0, exactly 0 for |t| >= 1. Compact support keeps
// feature influence regions sharp, which the locality oracles rely on.
double bump(double t_sq) {
    if (t_sq >= 1.0)
        return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - t_sq));
}

double elliptic_arg(double u, double v, double cu, double cv, double ru, double rv) {
    const double du = (u - cu) / ru;
    const double dv = (v - cv) / rv;
    return du * du + dv * dv;
}

// feature placement in grid units (u right, v up); landmark anchors and the
// nose center sit on the 1/16 lattice so every resolution of the 16k+1
// family snaps them to the same surface point
constexpr double kNoseCu = 0.0, kNoseCv = -0.0625;
constexpr double kEyeCu = 0.33, kEyeCv = 0.30, kEyeRu = 0.13, kEyeRv = 0.10;
constexpr double kChinCu = 0.0, kChinCv = -0.82, kChinRu = 0.16, kChinRv = 0.12;
constexpr double kCheekCu = 0.45, kCheekCv = -0.12, kCheekRu = 0.16, kCheekRv = 0.14;
constexpr double kMouthCu = 0.0, kMouthCv = -0.45, kMouthRu = 0.30, kMouthRv = 0.16;
constexpr double kSmileCu = 0.26, kSmileCv = -0.42, kSmileRu = 0.14, kSmileRv = 0.10;
constexpr double kBrowCu = 0.0, kBrowCv = 0.42, kBrowRu = 0.50, kBrowRv = 0.12;

// detail-bump rings: fixed positions well clear of the nose peak
constexpr double kDetailWidth = 0.09;

void detail_position(std::size_t d, double* cu, double* cv) {
    const double radius = d < 12 ? 0.70 : 0.52;
    const double angle =
        (15.0 + 30.0 * static_cast<double>(d % 12)) * std::numbers::pi / 180.0;
    *cu = radius * std::cos(angle);
    *cv = radius * std::sin(angle);
}

// landmark anchor positions (1/16 lattice)
constexpr double kMouthCornerU = 0.25, kMouthCornerV = -0.4375;
constexpr double kEyeCornerU = 0.4375, kEyeCornerV = 0.3125;
constexpr double kChinU = 0.0, kChinV = -0.875;

double grid_u(int iu, int res_u) { return -1.0 + 2.0 * iu / (res_u - 1); }
double grid_v(int iv, int res_v) { return -1.0 + 2.0 * iv / (res_v - 1); }

bool inside_disk(double u, double v) { return u * u + v * v <= 1.0 + 1e-12; }

// kept-vertex index per grid node, -1 outside the disk
std::vector<int> grid_index_map(int res_u, int res_v, int* kept_count) {
    std::vector<int> map(static_cast<std::size_t>(res_u) * res_v, -1);
    int next = 0;
    for (int iv = 0; iv < res_v; ++iv)
        for (int iu = 0; iu < res_u; ++iu)
            if (inside_disk(grid_u(iu, res_u), grid_v(iv, res_v)))
                map[static_cast<std::size_t>(iv) * res_u + iu] = next++;
    if (kept_count)
        *kept_count = next;
    return map;
}

int nearest_kept_vertex(double cu, double cv, int res_u, int res_v,
                        const std::vector<int>& map) {
    int best = -1;
    double best_sq = std::numeric_limits<double>::infinity();
    for (int iv = 0; iv < res_v; ++iv) {
        for (int iu = 0; iu < res_u; ++iu) {
            const int idx = map[static_cast<std::size_t>(iv) * res_u + iu];
            if (idx < 0)
                continue;
            const double du = grid_u(iu, res_u) - cu;
            const double dv = grid_v(iv, res_v) - cv;
            const double sq = du * du + dv * dv;
            if (sq < best_sq) {
                best_sq = sq;
                best = idx;
            }
        }
    }
    return best;
}

// widening profile of the lower face, smooth and 0 above v = -0.2
double jaw_profile(double v) {
    if (v >= -0.2)
        return 0.0;
    const double t = std::min(1.0, (-v - 0.2) / 0.6);
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

void FaceSpec::validate() const {
    if (res_u < 8 || res_v < 8)
        throw InvalidHyperparam("face grid resolution must be at least 8x8");
    for (double a : {radius_x, radius_y, radius_z, nose_amp, nose_width, jaw_width, eye_depth,
                     chin_amp, cheek_amp_l, cheek_amp_r, eye_height, eye_sep, cheek_height,
                     cheek_sep, chin_du, chin_dv, mouth_open, smile, brow_raise}) {
        if (!std::isfinite(a))
            throw InvalidHyperparam("face spec has a non-finite parameter");
    }
    for (double a : detail_amps)
        if (!std::isfinite(a))
            throw InvalidHyperparam("face spec has a non-finite detail amplitude");
    if (nose_width <= 0.0)
        throw InvalidHyperparam("nose width must be positive");
}

Mesh generate(const FaceSpec& spec) {
    spec.validate();
    const int ru = spec.res_u, rv = spec.res_v;
    int kept = 0;
    const std::vector<int> map = grid_index_map(ru, rv, &kept);

    // the nose bump peaks exactly on a grid vertex so the max-z vertex is
    // the same grid node for every identity of a resolution
    const int nose_vertex = nearest_kept_vertex(kNoseCu, kNoseCv, ru, rv, map);
    double nose_cu = 0.0, nose_cv = 0.0;
    {
        int seen = 0;
        for (int iv = 0; iv < rv && seen <= nose_vertex; ++iv) {
            for (int iu = 0; iu < ru; ++iu) {
                const int idx = map[static_cast<std::size_t>(iv) * ru + iu];
                if (idx == nose_vertex) {
                    nose_cu = grid_u(iu, ru);
                    nose_cv = grid_v(iv, rv);
                    seen = nose_vertex + 1;
                    break;
                }
            }
        }
    }

    Mesh mesh;
    mesh.vertices.reserve(kept);
    for (int iv = 0; iv < rv; ++iv) {
        for (int iu = 0; iu < ru; ++iu) {
            if (map[static_cast<std::size_t>(iv) * ru + iu] < 0)
                continue;
            const double u = grid_u(iu, ru);
            const double v = grid_v(iv, rv);

            const double eye_cu = kEyeCu + spec.eye_sep;
            const double eye_cv = kEyeCv + spec.eye_height;
            const double cheek_cu = kCheekCu + spec.cheek_sep;
            const double cheek_cv = kCheekCv + spec.cheek_height;

            double z = spec.radius_z * std::sqrt(std::max(0.0, 1.0 - 0.8 * (u * u + v * v)));
            z += spec.nose_amp *
                 bump(elliptic_arg(u, v, nose_cu, nose_cv, spec.nose_width, spec.nose_width));
            z -= spec.eye_depth * bump(elliptic_arg(u, v, -eye_cu, eye_cv, kEyeRu, kEyeRv));
            z -= spec.eye_depth * bump(elliptic_arg(u, v, eye_cu, eye_cv, kEyeRu, kEyeRv));
            z += spec.chin_amp * bump(elliptic_arg(u, v, kChinCu + spec.chin_du,
                                                   kChinCv + spec.chin_dv, kChinRu, kChinRv));
            z += spec.cheek_amp_l *
                 bump(elliptic_arg(u, v, -cheek_cu, cheek_cv, kCheekRu, kCheekRv));
            z += spec.cheek_amp_r *
                 bump(elliptic_arg(u, v, cheek_cu, cheek_cv, kCheekRu, kCheekRv));
            for (std::size_t d = 0; d < spec.detail_amps.size(); ++d) {
                if (spec.detail_amps[d] == 0.0)
                    continue;
                double cu = 0.0, cv = 0.0;
                detail_position(d, &cu, &cv);
                z += spec.detail_amps[d] *
                     bump(elliptic_arg(u, v, cu, cv, kDetailWidth, kDetailWidth));
            }
            z -= spec.mouth_open *
                 bump(elliptic_arg(u, v, kMouthCu, kMouthCv, kMouthRu, kMouthRv));
            z += spec.smile * bump(elliptic_arg(u, v, -kSmileCu, kSmileCv, kSmileRu, kSmileRv));
            z += spec.smile * bump(elliptic_arg(u, v, kSmileCu, kSmileCv, kSmileRu, kSmileRv));
            z += spec.brow_raise * bump(elliptic_arg(u, v, kBrowCu, kBrowCv, kBrowRu, kBrowRv));

            const double x = u * spec.radius_x * (1.0 + spec.jaw_width * jaw_profile(v));
            const double y = v * spec.radius_y;
            mesh.vertices.emplace_back(x, y, z);
        }
    }

    for (int iv = 0; iv + 1 < rv; ++iv) {
        for (int iu = 0; iu + 1 < ru; ++iu) {
            const int a = map[static_cast<std::size_t>(iv) * ru + iu];
            const int b = map[static_cast<std::size_t>(iv) * ru + iu + 1];
            const int c = map[static_cast<std::size_t>(iv + 1) * ru + iu];
            const int d = map[static_cast<std::size_t>(iv + 1) * ru + iu + 1];
            if (a >= 0 && b >= 0 && c >= 0)
                mesh.faces.push_back({a, b, c});
            if (b >= 0 && d >= 0 && c >= 0)
                mesh.faces.push_back({b, d, c});
        }
    }

    // nose tip is defined as the max-z vertex, consistent with detection
    int tip = 0;
    for (int i = 1; i < mesh.vertex_count(); ++i)
        if (mesh.vertices[i].z() > mesh.vertices[tip].z())
            tip = i;
    mesh.landmarks["nose_tip"] = tip;
    mesh.landmarks["mouth_corner_l"] =
        nearest_kept_vertex(-kMouthCornerU, kMouthCornerV, ru, rv, map);
    mesh.landmarks["mouth_corner_r"] =
        nearest_kept_vertex(kMouthCornerU, kMouthCornerV, ru, rv, map);
    mesh.landmarks["eye_corner_l"] = nearest_kept_vertex(-kEyeCornerU, kEyeCornerV, ru, rv, map);
    mesh.landmarks["eye_corner_r"] = nearest_kept_vertex(kEyeCornerU, kEyeCornerV, ru, rv, map);
    mesh.landmarks["chin"] = nearest_kept_vertex(kChinU, kChinV, ru, rv, map);
    mesh.validate();
    return mesh;
}

std::vector<std::pair<int, int>> grid_coordinates(int res_u, int res_v) {
    std::vector<std::pair<int, int>> out;
    for (int iv = 0; iv < res_v; ++iv)
        for (int iu = 0; iu < res_u; ++iu)
            if (inside_disk(grid_u(iu, res_u), grid_v(iv, res_v)))
                out.emplace_back(iu, iv);
    return out;
}

std::vector<int> expression_mask(int res_u, int res_v) {
    std::vector<int> out;
    int idx = 0;
    for (int iv = 0; iv < res_v; ++iv) {
        for (int iu = 0; iu < res_u; ++iu) {
            const double u = grid_u(iu, res_u);
            const double v = grid_v(iv, res_v);
            if (!inside_disk(u, v))
                continue;
            const bool affected =
                elliptic_arg(u, v, kMouthCu, kMouthCv, kMouthRu, kMouthRv) < 1.0 ||
                elliptic_arg(u, v, -kSmileCu, kSmileCv, kSmileRu, kSmileRv) < 1.0 ||
                elliptic_arg(u, v, kSmileCu, kSmileCv, kSmileRu, kSmileRv) < 1.0 ||
                elliptic_arg(u, v, kBrowCu, kBrowCv, kBrowRu, kBrowRv) < 1.0;
            if (affected)
                out.push_back(idx);
            ++idx;
        }
    }
    return out;
}

Degraded degrade(const Mesh& mesh, double noise_sigma, double keep_fraction,
                 std::uint64_t seed) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw InvalidHyperparam("keep_fraction must be in (0, 1]");
    if (noise_sigma < 0.0)
        throw InvalidHyperparam("noise sigma must be >= 0");
    const int n = mesh.vertex_count();
    Rng rng(Rng::mix(seed, 0xdeadfacade));

    // noise is drawn for every vertex first so the displacement of a kept
    // vertex does not depend on which others survive
    std::vector<Vec3> noisy(mesh.vertices);
    if (noise_sigma > 0.0)
        for (auto& v : noisy)
            v += Vec3(rng.normal(0.0, noise_sigma), rng.normal(0.0, noise_sigma),
                      rng.normal(0.0, noise_sigma));

    const int n_keep = std::max(1, static_cast<int>(std::llround(keep_fraction * n)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (n_keep < n) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
        order.resize(n_keep);
        std::sort(order.begin(), order.end());
    }

    Degraded out;
    out.provenance = std::move(order);
    out.mesh.vertices.reserve(out.provenance.size());
    std::vector<int> remap(n, -1);
    for (std::size_t i = 0; i < out.provenance.size(); ++i) {
        remap[out.provenance[i]] = static_cast<int>(i);
        out.mesh.vertices.push_back(noisy[out.provenance[i]]);
    }
    if (n_keep == n)
        out.mesh.faces = mesh.faces;
    for (const auto& [name, idx] : mesh.landmarks)
        if (remap[idx] >= 0)
            out.mesh.landmarks[name] = remap[idx];
    return out;
}

std::vector<Vec3> sample_surface(const Mesh& mesh, int n_points, std::uint64_t seed) {
    if (mesh.faces.empty())
        throw EmptyInput("sample_surface needs a mesh with faces");
    std::vector<double> cum(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3 e1 = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
        const Vec3 e2 = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
        total += 0.5 * e1.cross(e2).norm();
        cum[f] = total;
    }
    if (total <= 0.0)
        throw EmptyInput("mesh has zero surface area");

    Rng rng(Rng::mix(seed, 0x5a3b1e));
    std::vector<Vec3> out;
    out.reserve(n_points);
    for (int i = 0; i < n_points; ++i) {
        const double pick = rng.uniform() * total;
        const auto it = std::lower_bound(cum.begin(), cum.end(), pick);
        const auto& tri = mesh.faces[it - cum.begin()];
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        const Vec3 p = (1.0 - r1) * mesh.vertices[tri[0]] +
                       r1 * (1.0 - r2) * mesh.vertices[tri[1]] + r1 * r2 * mesh.vertices[tri[2]];
        out.push_back(p);
    }
    return out;
}

Dataset make_dataset(int n_identities, int n_expressions, int resolution, std::uint64_t seed) {
    if (n_identities < 1 || n_expressions < 1)
        throw InvalidHyperparam("dataset needs at least one identity and expression");

    auto identity_spec = [&](int identity) {
        Rng rng(Rng::mix(seed, 0x1d00 + static_cast<std::uint64_t>(identity)));
        FaceSpec spec;
        spec.res_u = spec.res_v = resolution;
        // mild global variation; identities differ mostly in local features
        spec.radius_x = rng.uniform(77.0, 83.0);
        spec.radius_y = rng.uniform(77.0, 83.0);
        spec.radius_z = rng.uniform(47.0, 53.0);
        spec.nose_amp = rng.uniform(7.0, 15.0);
        spec.nose_width = rng.uniform(0.10, 0.18);
        spec.jaw_width = rng.uniform(-0.08, 0.10);
        spec.eye_depth = rng.uniform(1.0, 5.0);
        spec.chin_amp = rng.uniform(0.0, 5.0);
        spec.cheek_amp_l = rng.uniform(0.0, 4.0);
        spec.cheek_amp_r = rng.uniform(0.0, 4.0);
        spec.eye_height = rng.uniform(-0.04, 0.04);
        spec.eye_sep = rng.uniform(-0.04, 0.04);
        spec.cheek_height = rng.uniform(-0.03, 0.03);
        spec.cheek_sep = rng.uniform(-0.04, 0.04);
        spec.chin_du = rng.uniform(-0.05, 0.05);
        spec.chin_dv = rng.uniform(-0.04, 0.04);
        for (auto& amp : spec.detail_amps)
            amp = rng.uniform(0.0, 3.0);
        spec.seed = Rng::mix(seed, static_cast<std::uint64_t>(identity));
        return spec;
    };
    auto apply_expression = [&](FaceSpec spec, int identity, int expression) {
        if (expression > 0) {
            Rng rng(Rng::mix(seed, 0xe000 + 1000 * static_cast<std::uint64_t>(identity) +
                                       static_cast<std::uint64_t>(expression)));
            spec.mouth_open = rng.uniform(3.0, 10.0);
            spec.smile = rng.uniform(0.0, 4.0);
            spec.brow_raise = rng.uniform(0.0, 3.0);
        }
        return spec;
    };

    Dataset ds;
    const int n_test_ids = std::max(1, n_identities / 4);
    std::vector<Mesh> train_meshes, test_meshes;
    for (int id = 0; id < n_identities + n_test_ids; ++id) {
        const bool is_test = id >= n_identities;
        for (int e = 0; e < n_expressions; ++e) {
            const FaceSpec spec = apply_expression(identity_spec(id), id, e);
            Mesh mesh = generate(spec);
            if (ds.topology.empty()) {
                ds.topology = mesh.faces;
                ds.landmarks = mesh.landmarks;
            }
            if (is_test) {
                ds.test_specs.push_back(spec);
                ds.test_identity.push_back(id);
                ds.test_expression.push_back(e);
                test_meshes.push_back(std::move(mesh));
            } else {
                ds.train_specs.push_back(spec);
                ds.train_identity.push_back(id);
                ds.train_expression.push_back(e);
                train_meshes.push_back(std::move(mesh));
            }
        }
    }

    auto to_set = [&](std::vector<Mesh>& meshes) {
        TrainingSet ts;
        ts.m = meshes[0].vertex_count();
        ts.N = static_cast<int>(meshes.size());
        ts.topology = ds.topology;
        for (auto& mesh : meshes)
            ts.shapes.push_back(shape_vector(mesh));
        return ts;
    };
    ds.train = to_set(train_meshes);
    ds.test = to_set(test_meshes);
    ds.expression_region = expression_mask(resolution, resolution);
    return ds;
}

} // namespace slc::synth
