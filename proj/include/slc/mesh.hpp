// Mesh: the universal geometry carrier of the pipeline. Positions are in
// millimeters; faces and landmarks are optional. Indices are 0-based in
// memory (OBJ's 1-based indices are converted in the I/O layer).
#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "slc/errors.hpp"

namespace slc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

using Face = std::array<int, 3>;
// Ordered map so serialized landmark files are deterministic.
using LandmarkMap = std::map<std::string, int>;

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    LandmarkMap landmarks;

    int vertex_count() const { return static_cast<int>(vertices.size()); }

    // Checks the type invariants: indices in range, coordinates finite.
    // Throws IndexError / ParseError on violation.
    void validate() const {
        const int n = vertex_count();
        for (const auto& v : vertices) {
            if (!std::isfinite(v.x()) || !std::isfinite(v.y()) || !std::isfinite(v.z()))
                throw ParseError("mesh has a non-finite vertex coordinate");
        }
        for (const auto& f : faces) {
            for (int idx : f) {
                if (idx < 0 || idx >= n)
                    throw IndexError("face references vertex " + std::to_string(idx) +
                                     " out of " + std::to_string(n));
            }
        }
        for (const auto& [name, idx] : landmarks) {
            if (idx < 0 || idx >= n)
                throw IndexError("landmark '" + name + "' references vertex " +
                                 std::to_string(idx) + " out of " + std::to_string(n));
        }
    }
};

// Linearized view [x1,y1,z1,...,xm,ym,zm] of the vertex positions.
inline VecX shape_vector(const Mesh& mesh) {
    VecX v(3 * mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        v.segment<3>(3 * i) = mesh.vertices[i];
    return v;
}

inline std::vector<Vec3> points_from_shape_vector(const VecX& v) {
    if (v.size() % 3 != 0)
        throw DimensionMismatch("shape vector length not divisible by 3");
    std::vector<Vec3> pts(v.size() / 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i] = v.segment<3>(3 * i);
    return pts;
}

inline Mesh mesh_from_shape_vector(const VecX& v, std::vector<Face> faces = {},
                                   LandmarkMap landmarks = {}) {
    Mesh m;
    m.vertices = points_from_shape_vector(v);
    m.faces = std::move(faces);
    m.landmarks = std::move(landmarks);
    return m;
}

} // namespace slc
