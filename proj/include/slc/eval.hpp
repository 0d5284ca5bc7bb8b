// Statistical shape-model quality metrics (compactness, generalization,
// specificity), cumulative error distributions, and the hyperparameter
// sweep driver. Reports serialize to CSV with '#'-prefixed metadata lines.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slc/model.hpp"
#include "slc/nrf.hpp"

namespace slc {

struct MetricReport {
    std::string metric;
    std::vector<int> ks;          // strictly increasing component counts
    std::vector<double> values;   // fraction for compactness, mm otherwise
    std::map<std::string, std::string> metadata;

    void validate() const;
};

void write_metric_report(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_metric_report(const std::filesystem::path& path);

// Fraction of training variance explained by the first k components. The
// model must carry its full eigenvalue spectrum.
MetricReport compactness(const PcaModel& pca, const std::vector<int>& ks);

// Mean per-vertex reconstruction error of held-out shapes when the basis is
// truncated to k columns. SLC fits use the regularized closed form with the
// given lambda; PCA fits use plain least squares at lambda = 0.
MetricReport generalization(const PcaModel& model, const TrainingSet& test,
                            const std::vector<int>& ks, double lambda = 0.0);
MetricReport generalization(const SlcModel& model, const TrainingSet& test,
                            const std::vector<int>& ks, double lambda);

// Average over n_samples random model draws (per-component Gaussian with
// eigenvalue variance) of the distance to the closest test shape.
double specificity(const PcaModel& model, const TrainingSet& test, int k, int n_samples,
                   std::uint64_t seed);

// Empirical CDF of `errors` sampled at the given bin edges (inclusive).
std::vector<double> cumulative_error_distribution(const std::vector<double>& errors,
                                                  const std::vector<double>& bins);

struct SweepCell {
    int k = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double mean_error = 0.0;        // mean final NRF error over the targets (mm)
    double deformed_fraction = 0.0; // mean over components of the fraction of
                                    // vertices a component moves by > 1e-6 mm
};

struct SweepGrid {
    std::vector<int> ks;
    std::vector<double> lambda1s;
    std::vector<double> lambda2s;
    int rounds = 60;
    std::uint64_t seed = 0;
    NrfParams fit;
};

// Fraction of vertices displaced by more than `threshold` mm by at least
// one unit application of each single component, averaged over components.
double deformed_vertex_fraction(const SlcModel& model, double threshold = 1e-6);

// Learns a model and fits every target for each grid cell. Cell seeds are
// derived from the grid coordinates, so results do not depend on scheduling.
std::vector<SweepCell> sweep(const SweepGrid& grid, const TrainingSet& train,
                             const std::vector<Mesh>& targets);

} // namespace slc
