// Semantic annotation transfer: once the template has been fitted, each
// template vertex is paired with a distinct target vertex so the target
// inherits the template's indexing, topology, and landmark names.
#pragma once

#include <vector>

#include "slc/mesh.hpp"

namespace slc {

struct ReindexedModel {
    Mesh mesh;                       // m vertices drawn from the target
    std::vector<int> source_indices; // pairwise-distinct target indices
};

// Injective greedy assignment: candidate (template vertex, target vertex)
// pairs from k-NN lists are consumed in globally increasing distance order
// (ties: template index, then target index); k starts at 4 and doubles per
// round until every template vertex is assigned. Faces and landmark names
// carry over unchanged since the output keeps the template indexing.
ReindexedModel transfer_annotation(const std::vector<Vec3>& fitted, const Mesh& target,
                                   const std::vector<Face>& template_topology,
                                   const LandmarkMap& template_landmarks);

// Per-landmark Euclidean distance between the transferred positions and a
// ground-truth annotation of the same target.
std::map<std::string, double> landmark_error(const ReindexedModel& reindexed,
                                             const Mesh& target,
                                             const LandmarkMap& ground_truth);

} // namespace slc
