// Mesh, landmark, and model-container I/O.
//
// Supported mesh formats: OBJ (v/f records; vt/vn parsed and discarded;
// polygons fan-triangulated) and PLY (ascii + binary_little_endian; only
// x,y,z and faces retained). Landmarks travel in a `.lmk` CSV sidecar next
// to the mesh file: header `name,index`, one row per landmark, LF endings.
//
// Model container (binary, little-endian):
//   bytes 0..3   magic "SLC1"
//   uint32 m, uint32 k, uint32 n_train
//   float64 mean[3m], basis[3m*k], directions[n_train*k], weights[k]
// Arrays are row-major; the round trip is bit-exact.
#pragma once

#include <filesystem>

#include "slc/mesh.hpp"
#include "slc/model.hpp"

namespace slc::io {

// Reads .obj or .ply; loads a `.lmk` sidecar when one exists.
Mesh read_mesh(const std::filesystem::path& path);

// Writes .obj or ascii .ply by extension; writes the `.lmk` sidecar when
// the mesh carries landmarks. Coordinates keep full double precision.
void write_mesh(const Mesh& mesh, const std::filesystem::path& path);

LandmarkMap read_landmarks(const std::filesystem::path& path);
void write_landmarks(const LandmarkMap& landmarks, const std::filesystem::path& path);

SlcModel read_model(const std::filesystem::path& path);
void write_model(const SlcModel& model, const std::filesystem::path& path);

// Path of the landmark sidecar belonging to a mesh file.
std::filesystem::path landmark_sidecar(const std::filesystem::path& mesh_path);

} // namespace slc::io
