#include "slc/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "slc/rng.hpp"
#include "slc/slc_learn.hpp"

namespace slc {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// mean distance between corresponding vertices of two linearized shapes
double mean_vertex_distance(const VecX& a, const VecX& b) {
    const auto m = a.size() / 3;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
        sum += (a.segment<3>(3 * j) - b.segment<3>(3 * j)).norm();
    return sum / static_cast<double>(m);
}

VecX fit_coefficients(const MatX& basis, const VecX& displacement, double lambda,
                      const VecX* weights) {
    MatX normal = basis.transpose() * basis;
    if (lambda > 0.0) {
        for (Eigen::Index j = 0; j < normal.rows(); ++j) {
            const double w = weights ? std::max((*weights)[j], 1e-8) : 1.0;
            normal(j, j) += lambda / w;
        }
    }
    return normal.ldlt().solve(basis.transpose() * displacement);
}

} // namespace

void MetricReport::validate() const {
    if (ks.size() != values.size())
        throw DimensionMismatch("metric report axes differ in length");
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1])
            throw DimensionMismatch("metric report x-axis must be strictly increasing");
    for (double v : values)
        if (!std::isfinite(v))
            throw DimensionMismatch("metric report has a non-finite value");
}

void write_metric_report(const MetricReport& report, const std::filesystem::path& path) {
    report.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "# metric: " << report.metric << "\n";
    for (const auto& [key, value] : report.metadata)
        out << "# " << key << ": " << value << "\n";
    out << "k,value\n";
    for (std::size_t i = 0; i < report.ks.size(); ++i)
        out << report.ks[i] << ',' << format_double(report.values[i]) << '\n';
    if (!out)
        throw IoError("short write to " + path.string());
}

MetricReport read_metric_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    MetricReport report;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const auto colon = body.find(':');
            if (colon == std::string::npos)
                continue;
            std::string key = body.substr(0, colon);
            std::string value = body.substr(colon + 1);
            auto trim = [](std::string& s) {
                while (!s.empty() && s.front() == ' ')
                    s.erase(s.begin());
                while (!s.empty() && s.back() == ' ')
                    s.pop_back();
            };
            trim(key);
            trim(value);
            if (key == "metric")
                report.metric = value;
            else
                report.metadata[key] = value;
            continue;
        }
        if (!header_seen) {
            if (line != "k,value")
                throw ParseError(path.string() + ": expected 'k,value' header");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path.string() + ": expected 'k,value' row");
        report.ks.push_back(std::stoi(line.substr(0, comma)));
        report.values.push_back(std::stod(line.substr(comma + 1)));
    }
    report.validate();
    return report;
}

MetricReport compactness(const PcaModel& pca, const std::vector<int>& ks) {
    const double total = pca.eigenvalues.sum();
    MetricReport report;
    report.metric = "compactness";
    for (int k : ks) {
        if (k < 1 || k > pca.eigenvalues.size())
            throw KTooLarge("compactness k out of range");
        report.ks.push_back(k);
        report.values.push_back(total > 0.0 ? pca.eigenvalues.head(k).sum() / total : 1.0);
    }
    report.validate();
    return report;
}

MetricReport generalization(const PcaModel& model, const TrainingSet& test,
                            const std::vector<int>& ks, double lambda) {
    test.validate();
    MetricReport report;
    report.metric = "generalization";
    report.metadata["model"] = "pca";
    for (int k : ks) {
        if (k < 1 || k > model.basis.cols())
            throw KTooLarge("generalization k exceeds model rank");
        const MatX basis = model.basis.leftCols(k);
        double total = 0.0;
        for (const auto& shape : test.shapes) {
            const VecX alpha = fit_coefficients(basis, shape - model.mean, lambda, nullptr);
            total += mean_vertex_distance(shape, model.mean + basis * alpha);
        }
        report.ks.push_back(k);
        report.values.push_back(total / static_cast<double>(test.N));
    }
    report.validate();
    return report;
}

MetricReport generalization(const SlcModel& model, const TrainingSet& test,
                            const std::vector<int>& ks, double lambda) {
    test.validate();
    MetricReport report;
    report.metric = "generalization";
    report.metadata["model"] = "slc";
    for (int k : ks) {
        if (k < 1 || k > model.k)
            throw KTooLarge("generalization k exceeds model components");
        const MatX basis = model.basis.leftCols(k);
        const VecX weights = model.weights.head(k);
        double total = 0.0;
        for (const auto& shape : test.shapes) {
            const VecX alpha = fit_coefficients(basis, shape - model.mean, lambda, &weights);
            total += mean_vertex_distance(shape, model.mean + basis * alpha);
        }
        report.ks.push_back(k);
        report.values.push_back(total / static_cast<double>(test.N));
    }
    report.validate();
    return report;
}

double specificity(const PcaModel& model, const TrainingSet& test, int k, int n_samples,
                   std::uint64_t seed) {
    test.validate();
    if (k < 1 || k > model.basis.cols())
        throw KTooLarge("specificity k exceeds model rank");
    Rng rng(Rng::mix(seed, 0x5bec1f1c));
    double total = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        VecX alpha = VecX::Zero(model.basis.cols());
        for (int j = 0; j < k; ++j)
            alpha[j] = rng.normal(0.0, std::sqrt(std::max(0.0, model.eigenvalues[j])));
        const VecX sample = model.mean + model.basis * alpha;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& shape : test.shapes)
            best = std::min(best, mean_vertex_distance(sample, shape));
        total += best;
    }
    return total / static_cast<double>(n_samples);
}

std::vector<double> cumulative_error_distribution(const std::vector<double>& errors,
                                                  const std::vector<double>& bins) {
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    out.reserve(bins.size());
    for (double edge : bins) {
        const auto count =
            std::upper_bound(sorted.begin(), sorted.end(), edge) - sorted.begin();
        out.push_back(sorted.empty() ? 1.0
                                     : static_cast<double>(count) /
                                           static_cast<double>(sorted.size()));
    }
    return out;
}

double deformed_vertex_fraction(const SlcModel& model, double threshold) {
    const int m = model.vertex_count();
    if (m == 0 || model.k == 0)
        return 0.0;
    double total = 0.0;
    for (int j = 0; j < model.k; ++j) {
        int moved = 0;
        for (int v = 0; v < m; ++v)
            if (model.basis.block<3, 1>(3 * v, j).norm() > threshold)
                ++moved;
        total += static_cast<double>(moved) / static_cast<double>(m);
    }
    return total / static_cast<double>(model.k);
}

std::vector<SweepCell> sweep(const SweepGrid& grid, const TrainingSet& train,
                             const std::vector<Mesh>& targets) {
    if (grid.ks.empty() || grid.lambda1s.empty() || grid.lambda2s.empty())
        throw InvalidHyperparam("sweep grid must be nonempty");
    std::vector<SweepCell> cells;
    for (std::size_t ik = 0; ik < grid.ks.size(); ++ik) {
        for (std::size_t i1 = 0; i1 < grid.lambda1s.size(); ++i1) {
            for (std::size_t i2 = 0; i2 < grid.lambda2s.size(); ++i2) {
                LearnOptions opt;
                opt.lambda1 = grid.lambda1s[i1];
                opt.lambda2 = grid.lambda2s[i2];
                opt.rounds = grid.rounds;
                opt.seed = Rng::mix(grid.seed, (ik << 16) ^ (i1 << 8) ^ i2);
                const SlcModel model = learn_slc(train, grid.ks[ik], opt);

                SweepCell cell;
                cell.k = grid.ks[ik];
                cell.lambda1 = opt.lambda1;
                cell.lambda2 = opt.lambda2;
                cell.deformed_fraction = deformed_vertex_fraction(model);
                double err = 0.0;
                for (const auto& target : targets) {
                    const FitResult fit = nrf(model, target, grid.fit);
                    err += fit.error_trace.empty() ? 0.0 : fit.error_trace.back();
                }
                cell.mean_error = targets.empty() ? 0.0 : err / static_cast<double>(targets.size());
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

} // namespace slc
