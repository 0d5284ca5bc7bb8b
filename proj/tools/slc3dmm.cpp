// slc3dmm: batch front-end for the pipeline.
//   synth    generate a synthetic dataset with ground-truth annotations
//   learn    learn the sparse deformation components from registered meshes
//   fit      crop/align raw targets and run the non-rigid fitting loop
//   transfer re-index fitted targets with the template topology/landmarks
//   eval     shape-model quality metrics (compactness/generalization/specificity)
//   sweep    hyperparameter grid over learn+fit
//
// Every command is deterministic under a fixed seed; reruns produce
// byte-identical artifacts. Exit codes: 0 ok, 1 internal error, 2 config
// error, 3 data error.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "slc/eval.hpp"
#include "slc/mesh_io.hpp"
#include "slc/nrf.hpp"
#include "slc/rng.hpp"
#include "slc/slc_learn.hpp"
#include "slc/synth.hpp"
#include "slc/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigUsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p))
        throw ConfigUsageError(std::string(what) + " not found: " + p.string());
}

std::vector<fs::path> sorted_meshes_in(const fs::path& dir) {
    require_exists(dir, "input directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".obj" || ext == ".ply")
            out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// temp-then-rename so partially written artifacts never appear under --out
void atomic_write_text(const fs::path& path, const std::string& body) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw slc::IoError("cannot write " + tmp.string());
        out << body;
    }
    fs::rename(tmp, path);
}

void atomic_write_mesh(const slc::Mesh& mesh, const fs::path& path) {
    fs::path tmp = path.parent_path() / (".tmp_" + path.filename().string());
    slc::io::write_mesh(mesh, tmp);
    fs::rename(tmp, path);
    const fs::path tmp_lmk = slc::io::landmark_sidecar(tmp);
    if (fs::exists(tmp_lmk))
        fs::rename(tmp_lmk, slc::io::landmark_sidecar(path));
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty())
            out.push_back(std::stoi(tok));
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty())
            out.push_back(std::stod(tok));
    return out;
}

// Flat `key=value` config files with '#' comments. Each key mirrors a flag
// of the subcommand one-to-one; values from the file are injected before
// the explicit flags, so the command line takes precedence.
std::vector<std::string> inject_config(std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            break;
        }
    }
    if (config_path.empty())
        return args;
    if (args.empty() || args[0].empty() || args[0][0] == '-')
        return args;

    std::ifstream in(config_path);
    if (!in)
        throw ConfigUsageError("cannot open config file: " + config_path);
    std::vector<std::string> synthesized;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigUsageError(config_path + ":" + std::to_string(lineno) +
                                   ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || key == "config")
            throw ConfigUsageError(config_path + ":" + std::to_string(lineno) + ": bad key");
        synthesized.push_back("--" + key + "=" + value);
    }
    args.insert(args.begin() + 1, synthesized.begin(), synthesized.end());
    return args;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    std::string out;
    int identities = 8;
    int expressions = 3;
    int resolution = 33;
    std::uint64_t seed = 1;
    double noise = 0.0;
    double keep = 1.0;
};

int cmd_synth(const SynthArgs& args) {
    const fs::path out(args.out);
    fs::create_directories(out / "train");
    fs::create_directories(out / "test");

    slc::synth::Dataset ds =
        slc::synth::make_dataset(args.identities, args.expressions, args.resolution, args.seed);

    std::string manifest = "mesh_id,identity_id,expression_id,split,seed\n";
    auto dump_split = [&](const slc::TrainingSet& set, const std::vector<int>& ids,
                          const std::vector<int>& exprs, const char* split) {
        for (int i = 0; i < set.N; ++i) {
            slc::Mesh mesh =
                slc::mesh_from_shape_vector(set.shapes[i], ds.topology, ds.landmarks);
            char name[64];
            std::snprintf(name, sizeof(name), "id%03d_e%02d", ids[i], exprs[i]);
            atomic_write_mesh(mesh, out / split / (std::string(name) + ".obj"));
            manifest += std::string(name) + "," + std::to_string(ids[i]) + "," +
                        std::to_string(exprs[i]) + "," + split + "," +
                        std::to_string(args.seed) + "\n";
        }
    };
    dump_split(ds.train, ds.train_identity, ds.train_expression, "train");
    dump_split(ds.test, ds.test_identity, ds.test_expression, "test");

    // degraded targets with provenance, when requested
    if (args.noise > 0.0 || args.keep < 1.0) {
        fs::create_directories(out / "targets");
        for (int i = 0; i < ds.test.N; ++i) {
            slc::Mesh mesh =
                slc::mesh_from_shape_vector(ds.test.shapes[i], ds.topology, ds.landmarks);
            const auto degraded = slc::synth::degrade(
                mesh, args.noise, args.keep,
                slc::Rng::mix(args.seed, 0x7a96e7 + static_cast<std::uint64_t>(i)));
            char name[64];
            std::snprintf(name, sizeof(name), "id%03d_e%02d", ds.test_identity[i],
                          ds.test_expression[i]);
            atomic_write_mesh(degraded.mesh, out / "targets" / (std::string(name) + ".obj"));
            std::string prov = "kept_index,original_index\n";
            for (std::size_t j = 0; j < degraded.provenance.size(); ++j)
                prov += std::to_string(j) + "," + std::to_string(degraded.provenance[j]) + "\n";
            atomic_write_text(out / "targets" / (std::string(name) + "_provenance.csv"), prov);
        }
    }

    std::string mask = "vertex_index\n";
    for (int idx : ds.expression_region)
        mask += std::to_string(idx) + "\n";
    atomic_write_text(out / "expression_mask.csv", mask);
    atomic_write_text(out / "manifest.csv", manifest);
    return 0;
}

// ------------------------------------------------------------------ learn

struct LearnArgs {
    std::string train_dir;
    std::string out;
    int k = 50;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int iters = 100;
    std::uint64_t seed = 1;
    std::string preset;
};

int cmd_learn(const LearnArgs& args) {
    const fs::path out(args.out);
    fs::create_directories(out / "models");

    const auto paths = sorted_meshes_in(args.train_dir);
    if (paths.size() < 2)
        throw slc::DimensionMismatch("training directory needs at least 2 meshes");

    std::vector<slc::Mesh> meshes;
    int expected = -1;
    for (const auto& p : paths) {
        slc::Mesh mesh = slc::io::read_mesh(p);
        if (expected < 0)
            expected = mesh.vertex_count();
        else if (mesh.vertex_count() != expected)
            throw slc::DimensionMismatch(p.string() + ": vertex count " +
                                         std::to_string(mesh.vertex_count()) +
                                         " does not match " + std::to_string(expected));
        meshes.push_back(std::move(mesh));
    }
    const slc::TrainingSet ts = slc::training_set_from_meshes(meshes);

    auto [mean, V] = slc::build_displacements(ts);
    slc::FactorizeOptions fopt;
    fopt.lambda1 = args.lambda1;
    fopt.lambda2 = args.lambda2;
    fopt.rounds = args.iters;
    fopt.seed = args.seed;
    const slc::MatX samples = V.transpose();
    slc::FactorizeResult fact = slc::factorize(samples, args.k, fopt);

    slc::SlcModel model;
    model.mean = mean;
    model.basis = fact.coefficients.transpose();
    model.directions = fact.directions;
    model.weights = model.directions.colwise().mean().transpose();
    model.k = args.k;
    model.lambda1 = args.lambda1;
    model.lambda2 = args.lambda2;
    model.validate();

    const fs::path model_tmp = out / "models" / ".tmp_model.slc";
    slc::io::write_model(model, model_tmp);
    fs::rename(model_tmp, out / "models" / "model.slc");

    // template mesh: mean shape with the shared topology and landmarks
    slc::Mesh mean_mesh =
        slc::mesh_from_shape_vector(model.mean, ts.topology, meshes.front().landmarks);
    atomic_write_mesh(mean_mesh, out / "models" / "mean.obj");

    std::string log = "# seed: " + std::to_string(args.seed) + "\n";
    log += "# k: " + std::to_string(args.k) + "\n";
    log += "# lambda1: " + fmt(args.lambda1) + "\n# lambda2: " + fmt(args.lambda2) + "\n";
    log += "round,objective\n";
    for (std::size_t r = 0; r < fact.objective_trace.size(); ++r)
        log += std::to_string(r) + "," + fmt(fact.objective_trace[r]) + "\n";
    atomic_write_text(out / "models" / "learn_log.csv", log);
    return 0;
}

// -------------------------------------------------------------------- fit

struct FitArgs {
    std::string model;
    std::string template_mesh;
    std::vector<std::string> targets;
    std::string out;
    double tau_e = 0.01;
    int max_iter = 30;
    double lambda = 1.0;
    double crop_radius = 95.0;
    int icp_iters = 50;
    double icp_tol = 1e-6;
    bool crop_template = false;
};

std::vector<fs::path> expand_targets(const std::vector<std::string>& targets) {
    std::vector<fs::path> out;
    for (const auto& t : targets) {
        fs::path p(t);
        require_exists(p, "target");
        if (fs::is_directory(p)) {
            auto inner = sorted_meshes_in(p);
            out.insert(out.end(), inner.begin(), inner.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

int cmd_fit(const FitArgs& args) {
    require_exists(args.model, "model file");
    const fs::path out(args.out);
    fs::create_directories(out / "fits");

    slc::SlcModel model = slc::io::read_model(args.model);
    if (args.crop_template)
        model = slc::crop_model(model, args.crop_radius);
    const std::vector<slc::Vec3> mean_points = slc::points_from_shape_vector(model.mean);

    std::optional<slc::Mesh> template_mesh;
    if (!args.template_mesh.empty()) {
        require_exists(args.template_mesh, "template mesh");
        template_mesh = slc::io::read_mesh(args.template_mesh);
        if (args.crop_template)
            template_mesh = slc::crop_and_center(*template_mesh, args.crop_radius);
        if (template_mesh->vertex_count() != model.vertex_count())
            throw slc::DimensionMismatch("template mesh does not match the model");
    }

    const auto target_paths = expand_targets(args.targets);
    if (target_paths.empty())
        throw ConfigUsageError("no targets given");

    slc::NrfParams params{args.tau_e, args.max_iter, args.lambda};
    std::string summary = "target,final_error_mm,iterations,converged\n";
    int failures = 0;

    for (const auto& path : target_paths) {
        const std::string stem = path.stem().string();
        try {
            const slc::Mesh raw = slc::io::read_mesh(path);
            slc::PreprocessedTarget prep = slc::preprocess_target(
                raw, mean_points, args.crop_radius, args.icp_iters, args.icp_tol);
            const slc::FitResult fit = slc::nrf(model, prep.mesh, params);

            slc::Mesh fitted;
            fitted.vertices = fit.shape;
            if (template_mesh) {
                fitted.faces = template_mesh->faces;
                fitted.landmarks = template_mesh->landmarks;
            }
            atomic_write_mesh(fitted, out / "fits" / (stem + "_fitted.obj"));

            const slc::SimilarityTransform total = prep.transform.then(fit.target_alignment);
            json j;
            j["target"] = path.filename().string();
            j["final_error_mm"] = fit.error_trace.empty() ? -1.0 : fit.error_trace.back();
            j["iterations"] = fit.iterations;
            j["converged"] = fit.converged;
            j["error_trace"] = fit.error_trace;
            json alphas = json::array();
            for (const auto& a : fit.alpha)
                alphas.push_back(std::vector<double>(a.data(), a.data() + a.size()));
            j["alpha"] = std::move(alphas);
            json P = json::array();
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    P.push_back(total.P(r, c));
            j["align_P"] = std::move(P);
            j["align_T"] = {total.T.x(), total.T.y(), total.T.z()};
            j["kept_indices"] = prep.kept;
            atomic_write_text(out / "fits" / (stem + "_fit.json"), j.dump(2) + "\n");

            summary += stem + "," + fmt(fit.error_trace.empty() ? -1.0 : fit.error_trace.back()) +
                       "," + std::to_string(fit.iterations) + "," +
                       (fit.converged ? "true" : "false") + "\n";
        } catch (const std::exception& e) {
            std::cerr << "fit: skipping " << path.string() << ": " << e.what() << "\n";
            ++failures;
        }
    }
    atomic_write_text(out / "fits" / "summary.csv", summary);
    return failures == static_cast<int>(target_paths.size()) ? 3 : 0;
}

// --------------------------------------------------------------- transfer

struct TransferArgs {
    std::vector<std::string> fitted;
    std::string target_dir;
    std::string out;
};

int cmd_transfer(const TransferArgs& args) {
    const fs::path out(args.out);
    fs::create_directories(out / "transfers");
    require_exists(args.target_dir, "target directory");

    std::vector<fs::path> fitted_paths = expand_targets(args.fitted);
    // keep only "<stem>_fitted.obj" artifacts
    std::erase_if(fitted_paths, [](const fs::path& p) {
        return p.filename().string().find("_fitted") == std::string::npos;
    });
    if (fitted_paths.empty())
        throw ConfigUsageError("no fitted meshes given");

    std::string errors_csv = "target,landmark,error_mm\n";
    bool have_errors = false;
    int failures = 0;

    for (const auto& fitted_path : fitted_paths) {
        std::string stem = fitted_path.stem().string();
        stem = stem.substr(0, stem.rfind("_fitted"));
        try {
            const fs::path target_path = fs::path(args.target_dir) / (stem + ".obj");
            require_exists(target_path, "target mesh");
            const slc::Mesh fitted = slc::io::read_mesh(fitted_path);
            const slc::Mesh raw = slc::io::read_mesh(target_path);

            const fs::path json_path = fitted_path.parent_path() / (stem + "_fit.json");
            require_exists(json_path, "fit result json");
            std::ifstream jin(json_path);
            json j = json::parse(jin);

            slc::SimilarityTransform total;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    total.P(r, c) = j["align_P"][3 * r + c].get<double>();
            total.T = slc::Vec3(j["align_T"][0].get<double>(), j["align_T"][1].get<double>(),
                                j["align_T"][2].get<double>());
            const std::vector<int> kept = j["kept_indices"].get<std::vector<int>>();

            // bring the raw target's surviving vertices into the fitted frame
            slc::Mesh aligned;
            aligned.vertices.reserve(kept.size());
            for (int idx : kept)
                aligned.vertices.push_back(total.apply(raw.vertices[idx]));

            const slc::ReindexedModel local = slc::transfer_annotation(
                fitted.vertices, aligned, fitted.faces, fitted.landmarks);

            // express the result on the raw scan
            slc::ReindexedModel reindexed;
            reindexed.source_indices.resize(local.source_indices.size());
            reindexed.mesh.faces = fitted.faces;
            reindexed.mesh.landmarks = fitted.landmarks;
            reindexed.mesh.vertices.resize(local.source_indices.size());
            for (std::size_t v = 0; v < local.source_indices.size(); ++v) {
                reindexed.source_indices[v] = kept[local.source_indices[v]];
                reindexed.mesh.vertices[v] = raw.vertices[reindexed.source_indices[v]];
            }
            atomic_write_mesh(reindexed.mesh, out / "transfers" / (stem + "_reindexed.obj"));

            std::string idxcsv = "template_vertex,target_vertex\n";
            for (std::size_t v = 0; v < reindexed.source_indices.size(); ++v)
                idxcsv +=
                    std::to_string(v) + "," + std::to_string(reindexed.source_indices[v]) + "\n";
            atomic_write_text(out / "transfers" / (stem + "_indices.csv"), idxcsv);

            if (!raw.landmarks.empty() && !reindexed.mesh.landmarks.empty()) {
                const auto errs = slc::landmark_error(reindexed, raw, raw.landmarks);
                for (const auto& [name, err] : errs) {
                    errors_csv += stem + "," + name + "," + fmt(err) + "\n";
                    have_errors = true;
                }
            }
        } catch (const std::exception& e) {
            std::cerr << "transfer: skipping " << fitted_path.string() << ": " << e.what()
                      << "\n";
            ++failures;
        }
    }
    if (have_errors)
        atomic_write_text(out / "transfers" / "landmark_errors.csv", errors_csv);
    return failures == static_cast<int>(fitted_paths.size()) ? 3 : 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
    std::string train_dir;
    std::string test_dir;
    std::string model; // optional SLC model for generalization
    std::string out;
    std::string ks = "1,2,5,10";
    double lambda = 1e-6;
    int spec_samples = 200;
    std::uint64_t seed = 1;
};

slc::TrainingSet load_training_set(const fs::path& dir) {
    const auto paths = sorted_meshes_in(dir);
    if (paths.size() < 2)
        throw slc::DimensionMismatch(dir.string() + " needs at least 2 meshes");
    std::vector<slc::Mesh> meshes;
    meshes.reserve(paths.size());
    for (const auto& p : paths)
        meshes.push_back(slc::io::read_mesh(p));
    return slc::training_set_from_meshes(meshes);
}

int cmd_eval(const EvalArgs& args) {
    const fs::path out(args.out);
    fs::create_directories(out / "reports");

    const slc::TrainingSet train = load_training_set(args.train_dir);
    const slc::TrainingSet test = load_training_set(args.test_dir);

    const int full_rank = std::min<int>(3 * train.m, train.N - 1);
    const slc::PcaModel pca = slc::learn_pca(train, full_rank);

    std::vector<int> ks = parse_int_list(args.ks);
    std::erase_if(ks, [&](int k) { return k < 1 || k > full_rank; });
    if (ks.empty())
        throw ConfigUsageError("no usable k values for this training set");

    const std::string seed_meta = std::to_string(args.seed);

    slc::MetricReport comp = slc::compactness(pca, ks);
    comp.metadata["seed"] = seed_meta;
    slc::write_metric_report(comp, out / "reports" / "compactness.csv");

    slc::MetricReport gen = slc::generalization(pca, test, ks, 0.0);
    gen.metadata["seed"] = seed_meta;
    slc::write_metric_report(gen, out / "reports" / "generalization_pca.csv");

    if (!args.model.empty()) {
        require_exists(args.model, "model file");
        const slc::SlcModel model = slc::io::read_model(args.model);
        std::vector<int> slc_ks = parse_int_list(args.ks);
        std::erase_if(slc_ks, [&](int k) { return k < 1 || k > model.k; });
        if (!slc_ks.empty()) {
            slc::MetricReport gs = slc::generalization(model, test, slc_ks, args.lambda);
            gs.metadata["seed"] = seed_meta;
            gs.metadata["lambda"] = fmt(args.lambda);
            slc::write_metric_report(gs, out / "reports" / "generalization_slc.csv");
        }
    }

    slc::MetricReport spec;
    spec.metric = "specificity";
    spec.metadata["seed"] = seed_meta;
    spec.metadata["samples"] = std::to_string(args.spec_samples);
    for (int k : ks) {
        spec.ks.push_back(k);
        spec.values.push_back(slc::specificity(pca, test, k, args.spec_samples,
                                               slc::Rng::mix(args.seed, static_cast<std::uint64_t>(k))));
    }
    slc::write_metric_report(spec, out / "reports" / "specificity.csv");

    // cumulative per-vertex error distribution of the largest-k PCA fit
    {
        const int k = ks.back();
        const slc::MatX basis = pca.basis.leftCols(k);
        std::vector<double> errors;
        for (const auto& shape : test.shapes) {
            const slc::VecX alpha = basis.transpose() * (shape - pca.mean);
            const slc::VecX recon = pca.mean + basis * alpha;
            for (int v = 0; v < test.m; ++v)
                errors.push_back(
                    (shape.segment<3>(3 * v) - recon.segment<3>(3 * v)).norm());
        }
        std::vector<double> bins;
        for (int b = 0; b <= 50; ++b)
            bins.push_back(0.1 * b);
        const auto cdf = slc::cumulative_error_distribution(errors, bins);
        std::string csv = "# metric: error_cdf\n# k: " + std::to_string(k) +
                          "\n# seed: " + seed_meta + "\nerror_mm,fraction\n";
        for (std::size_t b = 0; b < bins.size(); ++b)
            csv += fmt(bins[b]) + "," + fmt(cdf[b]) + "\n";
        atomic_write_text(out / "reports" / "error_cdf.csv", csv);
    }
    return 0;
}

// ------------------------------------------------------------------ sweep

struct SweepArgs {
    std::string train_dir;
    std::string target_dir;
    std::string out;
    std::string ks = "50";
    std::string lambda1s = "1";
    std::string lambda2s = "1";
    int iters = 60;
    std::uint64_t seed = 1;
    double tau_e = 0.01;
    int max_iter = 30;
    double lambda = 1.0;
};

int cmd_sweep(const SweepArgs& args) {
    const fs::path out(args.out);
    fs::create_directories(out / "reports");

    const slc::TrainingSet train = load_training_set(args.train_dir);
    std::vector<slc::Mesh> targets;
    for (const auto& p : sorted_meshes_in(args.target_dir))
        targets.push_back(slc::io::read_mesh(p));

    slc::SweepGrid grid;
    grid.ks = parse_int_list(args.ks);
    grid.lambda1s = parse_double_list(args.lambda1s);
    grid.lambda2s = parse_double_list(args.lambda2s);
    grid.rounds = args.iters;
    grid.seed = args.seed;
    grid.fit = slc::NrfParams{args.tau_e, args.max_iter, args.lambda};

    const auto cells = slc::sweep(grid, train, targets);

    std::string csv = "# seed: " + std::to_string(args.seed) + "\n";
    csv += "k,lambda1,lambda2,mean_error_mm,deformed_fraction\n";
    for (const auto& c : cells)
        csv += std::to_string(c.k) + "," + fmt(c.lambda1) + "," + fmt(c.lambda2) + "," +
               fmt(c.mean_error) + "," + fmt(c.deformed_fraction) + "\n";
    atomic_write_text(out / "reports" / "sweep.csv", csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse locally coherent morphable model pipeline"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--out", synth_args.out, "Output directory")->required();
    synth->add_option("--identities", synth_args.identities, "Training identities")
        ->check(CLI::PositiveNumber);
    synth->add_option("--expressions", synth_args.expressions, "Expressions per identity")
        ->check(CLI::PositiveNumber);
    synth->add_option("--resolution", synth_args.resolution, "Grid resolution per axis")
        ->check(CLI::Range(8, 1024));
    synth->add_option("--seed", synth_args.seed, "Dataset seed");
    synth->add_option("--noise", synth_args.noise, "Target noise sigma (mm)")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--keep", synth_args.keep, "Target keep fraction (0,1]")
        ->check(CLI::Range(1e-6, 1.0));
    synth->add_option("--config", "Flat key=value config file mirroring these flags");

    LearnArgs learn_args;
    auto* learn = app.add_subcommand("learn", "Learn deformation components");
    learn->add_option("--train", learn_args.train_dir, "Directory of registered meshes")
        ->required();
    learn->add_option("--out", learn_args.out, "Output directory")->required();
    auto* learn_k =
        learn->add_option("--k", learn_args.k, "Component count")->check(CLI::PositiveNumber);
    auto* learn_l1 = learn->add_option("--lambda1", learn_args.lambda1, "L1 penalty")
                         ->check(CLI::NonNegativeNumber);
    auto* learn_l2 = learn->add_option("--lambda2", learn_args.lambda2, "L2 penalty")
                         ->check(CLI::NonNegativeNumber);
    learn->add_option("--iters", learn_args.iters, "Alternating rounds")
        ->check(CLI::PositiveNumber);
    learn->add_option("--seed", learn_args.seed, "Solver seed");
    learn->add_option("--preset", learn_args.preset, "Parameter preset")
        ->check(CLI::IsMember({"main-text", "supplemental"}));
    learn->add_option("--config", "Flat key=value config file mirroring these flags");

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "Fit the model to raw targets");
    fit->add_option("--model", fit_args.model, "Model file (.slc)")->required();
    fit->add_option("--template", fit_args.template_mesh,
                    "Template mesh carrying topology/landmarks");
    fit->add_option("--targets", fit_args.targets, "Target meshes or directories")
        ->required()
        ->expected(-1);
    fit->add_option("--out", fit_args.out, "Output directory")->required();
    fit->add_option("--tau-e", fit_args.tau_e, "Error improvement threshold (mm)")
        ->check(CLI::NonNegativeNumber);
    fit->add_option("--max-iter", fit_args.max_iter, "Iteration limit")
        ->check(CLI::PositiveNumber);
    fit->add_option("--lambda", fit_args.lambda, "Deformation regularizer")
        ->check(CLI::NonNegativeNumber);
    fit->add_option("--crop-radius", fit_args.crop_radius, "Crop sphere radius (mm)")
        ->check(CLI::PositiveNumber);
    fit->add_option("--icp-iters", fit_args.icp_iters, "Rigid ICP iteration limit")
        ->check(CLI::PositiveNumber);
    fit->add_option("--icp-tol", fit_args.icp_tol, "Rigid ICP improvement tolerance")
        ->check(CLI::NonNegativeNumber);
    fit->add_flag("--crop-template", fit_args.crop_template,
                  "Also crop the template to the crop radius");
    fit->add_option("--config", "Flat key=value config file mirroring these flags");

    TransferArgs transfer_args;
    auto* transfer = app.add_subcommand("transfer", "Transfer annotation to raw targets");
    transfer->add_option("--fitted", transfer_args.fitted, "Fitted meshes or fit directory")
        ->required()
        ->expected(-1);
    transfer->add_option("--targets", transfer_args.target_dir, "Raw target directory")
        ->required();
    transfer->add_option("--out", transfer_args.out, "Output directory")->required();
    transfer->add_option("--config", "Flat key=value config file mirroring these flags");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Shape-model quality metrics");
    eval->add_option("--train", eval_args.train_dir, "Training mesh directory")->required();
    eval->add_option("--test", eval_args.test_dir, "Held-out mesh directory")->required();
    eval->add_option("--model", eval_args.model, "Optional sparse model for generalization");
    eval->add_option("--out", eval_args.out, "Output directory")->required();
    eval->add_option("--ks", eval_args.ks, "Comma-separated component counts");
    eval->add_option("--lambda", eval_args.lambda, "Regularizer for sparse-model fits")
        ->check(CLI::NonNegativeNumber);
    eval->add_option("--specificity-samples", eval_args.spec_samples, "Random draws")
        ->check(CLI::PositiveNumber);
    eval->add_option("--seed", eval_args.seed, "Seed");
    eval->add_option("--config", "Flat key=value config file mirroring these flags");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Hyperparameter grid search");
    sweep->add_option("--train", sweep_args.train_dir, "Training mesh directory")->required();
    sweep->add_option("--targets", sweep_args.target_dir, "Target mesh directory")->required();
    sweep->add_option("--out", sweep_args.out, "Output directory")->required();
    sweep->add_option("--ks", sweep_args.ks, "Comma-separated k grid");
    sweep->add_option("--lambda1s", sweep_args.lambda1s, "Comma-separated lambda1 grid");
    sweep->add_option("--lambda2s", sweep_args.lambda2s, "Comma-separated lambda2 grid");
    sweep->add_option("--iters", sweep_args.iters, "Alternating rounds per cell")
        ->check(CLI::PositiveNumber);
    sweep->add_option("--seed", sweep_args.seed, "Base seed");
    sweep->add_option("--tau-e", sweep_args.tau_e, "Fit improvement threshold")
        ->check(CLI::NonNegativeNumber);
    sweep->add_option("--max-iter", sweep_args.max_iter, "Fit iteration limit")
        ->check(CLI::PositiveNumber);
    sweep->add_option("--lambda", sweep_args.lambda, "Fit regularizer")
        ->check(CLI::NonNegativeNumber);
    sweep->add_option("--config", "Flat key=value config file mirroring these flags");

    // later occurrences of a flag win, so config-file values can act as
    // overridable defaults
    for (auto* sub : {synth, learn, fit, transfer, eval, sweep})
        for (auto* opt : sub->get_options())
            if (opt->get_expected_max() == 1)
                opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = inject_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const ConfigUsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed())
            return cmd_synth(synth_args);
        if (learn->parsed()) {
            if (!learn_args.preset.empty()) {
                // preset fills in the published parameter sets; explicit
                // flags take precedence
                const bool supplemental = learn_args.preset == "supplemental";
                if (learn_k->count() == 0)
                    learn_args.k = 50;
                if (learn_l1->count() == 0)
                    learn_args.lambda1 = supplemental ? 10.0 : 1.0;
                if (learn_l2->count() == 0)
                    learn_args.lambda2 = 1.0;
            }
            return cmd_learn(learn_args);
        }
        if (fit->parsed())
            return cmd_fit(fit_args);
        if (transfer->parsed())
            return cmd_transfer(transfer_args);
        if (eval->parsed())
            return cmd_eval(eval_args);
        if (sweep->parsed())
            return cmd_sweep(sweep_args);
        return 2;
    } catch (const ConfigUsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const slc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
