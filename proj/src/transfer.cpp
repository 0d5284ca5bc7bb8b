#include "slc/transfer.hpp"

#include <algorithm>
#include <tuple>

#include "slc/geometry.hpp"

namespace slc {

ReindexedModel transfer_annotation(const std::vector<Vec3>& fitted, const Mesh& target,
                                   const std::vector<Face>& template_topology,
                                   const LandmarkMap& template_landmarks) {
    const int m = static_cast<int>(fitted.size());
    const int n = target.vertex_count();
    if (m == 0 || n == 0)
        throw EmptyInput("transfer_annotation needs nonempty inputs");
    if (n < m)
        throw TargetTooSmall("target has " + std::to_string(n) + " vertices, template needs " +
                             std::to_string(m));

    SpatialIndex index(target.vertices);
    std::vector<int> assignment(m, -1);
    std::vector<char> target_used(n, 0);
    int remaining = m;

    struct Candidate {
        double distance;
        int template_vertex;
        int target_vertex;
        bool operator<(const Candidate& o) const {
            return std::tie(distance, template_vertex, target_vertex) <
                   std::tie(o.distance, o.template_vertex, o.target_vertex);
        }
    };

    int k = 4;
    while (remaining > 0) {
        const int kk = std::min(k, n);
        std::vector<Candidate> candidates;
        for (int j = 0; j < m; ++j) {
            if (assignment[j] >= 0)
                continue;
            for (const auto& hit : index.knearest(fitted[j], kk)) {
                if (!target_used[hit.index])
                    candidates.push_back({hit.distance, j, hit.index});
            }
        }
        std::sort(candidates.begin(), candidates.end());
        for (const auto& c : candidates) {
            if (assignment[c.template_vertex] >= 0 || target_used[c.target_vertex])
                continue;
            assignment[c.template_vertex] = c.target_vertex;
            target_used[c.target_vertex] = 1;
            --remaining;
        }
        // widening to k = n guarantees termination since n >= m
        if (remaining > 0)
            k = kk >= n ? n : std::min(2 * k, n);
    }

    ReindexedModel out;
    out.source_indices = std::move(assignment);
    out.mesh.vertices.resize(m);
    for (int j = 0; j < m; ++j)
        out.mesh.vertices[j] = target.vertices[out.source_indices[j]];
    out.mesh.faces = template_topology;
    out.mesh.landmarks = template_landmarks;
    out.mesh.validate();
    return out;
}

std::map<std::string, double> landmark_error(const ReindexedModel& reindexed, const Mesh& target,
                                             const LandmarkMap& ground_truth) {
    std::map<std::string, double> out;
    for (const auto& [name, idx] : reindexed.mesh.landmarks) {
        auto it = ground_truth.find(name);
        if (it == ground_truth.end())
            continue;
        if (it->second < 0 || it->second >= target.vertex_count())
            throw IndexError("ground-truth landmark '" + name + "' out of range");
        out[name] = (reindexed.mesh.vertices[idx] - target.vertices[it->second]).norm();
    }
    if (out.empty())
        throw NoSharedLandmarks("no landmark names shared with the ground truth");
    return out;
}

} // namespace slc
