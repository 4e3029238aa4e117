#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewt/checkpoint.hpp"
#include "fewt/config.hpp"
#include "fewt/dataset.hpp"
#include "fewt/evalkit.hpp"
#include "fewt/io.hpp"
#include "fewt/mesh.hpp"
#include "fewt/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fewt;

#ifndef FEWT_GIT_REVISION
#define FEWT_GIT_REVISION "unknown"
#endif

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void flatten_defaults(const json& node, const std::string& prefix,
                      std::vector<std::string>& out) {
    for (const auto& [key, value] : node.items()) {
        std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object())
            flatten_defaults(value, path, out);
        else
            out.push_back("  " + path + " = " + value.dump());
    }
}

std::string config_key_help() {
    std::vector<std::string> lines;
    flatten_defaults(config::default_json(), "", lines);
    std::string out = "Config keys and defaults (set via config file or --set key=value):\n";
    for (const auto& l : lines) out += l + "\n";
    return out;
}

config::RunConfig load_config(const std::string& path, std::vector<std::string> overrides,
                              const std::string& out_dir, std::optional<std::uint64_t> seed) {
    if (out_dir != "") overrides.push_back("out_dir=\"" + out_dir + "\"");
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    try {
        return config::load(path, overrides);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

struct LoadedViews {
    std::vector<dataset::PosedImage> train;
    std::vector<dataset::PosedImage> test;
    std::vector<int> train_ids;
    std::vector<int> test_ids;
};

LoadedViews load_views(const config::RunConfig& cfg) {
    if (cfg.dataset.root.empty())
        throw UsageError("dataset.root is empty; point it at a scene directory");
    dataset::LoadOptions opts{cfg.dataset.background, cfg.dataset.downscale};
    dataset::Scene scene = dataset::load_scene(cfg.dataset.root, opts);
    LoadedViews out;
    out.train = dataset::few_shot_subset(scene.train, cfg.dataset.train_views,
                                         cfg.dataset.train_view_count, cfg.seed, &out.train_ids);
    const auto& test_split = scene.test.empty() ? scene.val : scene.test;
    if (!test_split.empty())
        out.test = dataset::few_shot_subset(test_split, cfg.dataset.test_views,
                                            cfg.dataset.test_view_count, cfg.seed + 1,
                                            &out.test_ids);
    return out;
}

json ids_json(const std::vector<int>& ids) {
    json a = json::array();
    for (int i : ids) a.push_back(i);
    return a;
}

struct TrainArtifacts {
    trainer::TrainResult result;
    std::string config_hash;
};

TrainArtifacts run_training(const config::RunConfig& cfg, const LoadedViews& views,
                            const std::string& resume_path = "") {
    trainer::TrainState state;
    if (!resume_path.empty()) {
        if (!fs::exists(resume_path)) throw UsageError("checkpoint not found: " + resume_path);
        state = ckpt::load(resume_path).state;
        state.model.masks = cfg.masks;  // schedules live in the config, not the file
    } else {
        state.model = Model::create(cfg.model, cfg.masks, cfg.seed);
        state.reset_moments();
    }

    trainer::TrainSession session;
    session.config = cfg.train;
    session.render = cfg.render;
    session.out_dir = cfg.out_dir;
    session.run_config_json = config::canonical_text(cfg);

    fs::create_directories(cfg.out_dir);
    TrainArtifacts artifacts;
    artifacts.config_hash = config::config_hash(cfg);
    artifacts.result = trainer::train(state, session, views.train);

    io::atomic_write((fs::path(cfg.out_dir) / "loss.csv").string(),
                     trainer::loss_log_csv(artifacts.result.log));
    json manifest{{"config_hash", artifacts.config_hash},
                  {"seed", cfg.seed},
                  {"git_revision", FEWT_GIT_REVISION},
                  {"iterations", cfg.train.iterations},
                  {"wall_seconds", artifacts.result.seconds},
                  {"selected_train_views", ids_json(views.train_ids)},
                  {"selected_test_views", ids_json(views.test_ids)},
                  {"downscale", cfg.dataset.downscale},
                  {"config", config::to_json(cfg)}};
    io::atomic_write((fs::path(cfg.out_dir) / "manifest.json").string(),
                     manifest.dump(2) + "\n");
    return artifacts;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, std::optional<std::uint64_t> seed,
              const std::string& resume_path) {
    config::RunConfig cfg = load_config(config_path, overrides, out_dir, seed);
    LoadedViews views = load_views(cfg);
    TrainArtifacts artifacts = run_training(cfg, views, resume_path);
    std::printf("trained %d iterations in %.1fs; final loss %.6g\n", cfg.train.iterations,
                artifacts.result.seconds,
                artifacts.result.log.empty() ? 0.0 : artifacts.result.log.back().loss.total);
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_root,
             const std::string& out_dir, const std::vector<std::string>& overrides,
             const std::string& views_arg) {
    if (!fs::exists(ckpt_path)) throw UsageError("checkpoint not found: " + ckpt_path);
    ckpt::Loaded loaded = ckpt::load(ckpt_path);
    if (loaded.config_json.empty())
        throw UsageError("checkpoint has no embedded config: " + ckpt_path);
    config::RunConfig cfg = config::from_json_text(loaded.config_json, overrides);
    if (!data_root.empty()) cfg.dataset.root = data_root;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!views_arg.empty()) {
        cfg.dataset.test_views.clear();
        std::size_t start = 0;
        while (start < views_arg.size()) {
            std::size_t comma = views_arg.find(',', start);
            cfg.dataset.test_views.push_back(
                std::stoi(views_arg.substr(start, comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }

    LoadedViews views = load_views(cfg);
    if (views.test.empty()) throw UsageError("no test views available for evaluation");

    double train_seconds = 0.0;
    fs::path manifest_path = fs::path(ckpt_path).parent_path() / "manifest.json";
    if (fs::exists(manifest_path)) {
        json manifest = json::parse(io::read_file(manifest_path.string()));
        if (manifest.contains("wall_seconds"))
            train_seconds = manifest["wall_seconds"].get<double>();
    }

    evalkit::EvalOptions opts;
    opts.quantized = cfg.eval.quantized_psnr;
    opts.train_seconds = train_seconds;
    opts.config_hash = config::config_hash(cfg);
    render::RenderSettings settings = cfg.render;
    settings.threads = cfg.threads;
    evalkit::EvalReport report =
        evalkit::evaluate(loaded.state.model, settings, views.test, cfg.out_dir, opts);
    std::printf("mean PSNR %.4f dB over %zu views; report in %s\n", report.mean_psnr,
                report.per_view_psnr.size(), cfg.out_dir.c_str());
    return 0;
}

int cmd_mesh(const std::string& ckpt_path, const std::string& out_path, double iso,
             int resolution) {
    if (!fs::exists(ckpt_path)) throw UsageError("checkpoint not found: " + ckpt_path);
    ckpt::Loaded loaded = ckpt::load(ckpt_path);
    double iso_value = iso;
    int res = resolution;
    if (!loaded.config_json.empty()) {
        config::RunConfig cfg = config::from_json_text(loaded.config_json, {});
        if (iso_value <= 0.0) iso_value = cfg.mesh.iso;
        if (res <= 0) res = cfg.mesh.resolution;
    }
    if (iso_value <= 0.0) iso_value = 25.0;
    if (res <= 0) res = 64;
    std::size_t triangles =
        mesh::export_mesh(loaded.state.model.density, iso_value, {res, res, res}, out_path);
    if (triangles == 0)
        std::fprintf(stderr, "warning: no voxel crosses iso %.3g; wrote an empty mesh\n",
                     iso_value);
    std::printf("wrote %zu triangles to %s\n", triangles, out_path.c_str());
    return 0;
}

int cmd_make_scene(const std::string& kind, int resolution, int views, int test_views,
                   std::uint64_t seed, int samples, const std::string& out_dir) {
    dataset::AnalyticSceneSpec spec;
    if (kind == "sphere")
        spec.kind = dataset::AnalyticKind::Sphere;
    else if (kind == "boxes")
        spec.kind = dataset::AnalyticKind::Boxes;
    else
        throw UsageError("--kind must be sphere or boxes");
    spec.resolution = resolution;
    spec.train_views = views;
    spec.test_views = test_views;
    spec.seed = seed;
    spec.samples_per_ray = samples;

    dataset::AnalyticScene scene = dataset::make_analytic_scene(spec);
    dataset::save_scene(out_dir, scene.scene, spec.camera_angle_x);
    json manifest{{"kind", kind},          {"resolution", resolution},
                  {"train_views", views},  {"test_views", test_views},
                  {"seed", seed},          {"samples_per_ray", samples}};
    io::atomic_write((fs::path(out_dir) / "scene.json").string(), manifest.dump(2) + "\n");
    std::printf("wrote %d train / %d test views to %s\n", views, test_views, out_dir.c_str());
    return 0;
}

struct BenchRow {
    std::string name;
    double mean_psnr = 0.0;
    double train_seconds = 0.0;
    std::string status = "ok";
};

int cmd_bench(const std::string& matrix_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
    json matrix;
    try {
        matrix = json::parse(io::read_file(matrix_path));
    } catch (const std::exception& e) {
        throw UsageError(std::string("bench matrix: ") + e.what());
    }
    if (!matrix.contains("variants") || !matrix["variants"].is_array() ||
        matrix["variants"].empty())
        throw UsageError("bench matrix needs a non-empty 'variants' array");

    std::string bench_dir = !out_dir.empty() ? out_dir
                            : matrix.contains("out_dir")
                                ? matrix["out_dir"].get<std::string>()
                                : "bench_out";
    std::uint64_t bench_seed = seed ? *seed
                               : matrix.contains("seed") ? matrix["seed"].get<std::uint64_t>()
                                                         : 0;
    std::string dataset_root =
        matrix.contains("dataset_root") ? matrix["dataset_root"].get<std::string>() : "";
    fs::create_directories(bench_dir);

    std::vector<BenchRow> rows;
    for (const auto& variant : matrix["variants"]) {
        BenchRow row;
        row.name = variant.at("name").get<std::string>();
        try {
            json cfg_doc;
            if (variant.contains("config"))
                cfg_doc = variant["config"];
            else if (variant.contains("config_path"))
                cfg_doc = json::parse(io::read_file(
                    (fs::path(matrix_path).parent_path() /
                     variant["config_path"].get<std::string>())
                        .string()));
            else
                throw std::runtime_error("variant needs 'config' or 'config_path'");

            // Same seed and dataset for every variant.
            cfg_doc["seed"] = bench_seed;
            if (!dataset_root.empty()) cfg_doc["dataset"]["root"] = dataset_root;
            cfg_doc["out_dir"] = (fs::path(bench_dir) / row.name).string();
            config::RunConfig cfg = config::from_json(cfg_doc);

            LoadedViews views = load_views(cfg);
            TrainArtifacts artifacts = run_training(cfg, views);
            row.train_seconds = artifacts.result.seconds;

            if (views.test.empty()) throw std::runtime_error("variant has no test views");
            ckpt::Loaded trained =
                ckpt::load((fs::path(cfg.out_dir) / "ckpt_final.fewt").string());
            evalkit::EvalOptions opts;
            opts.quantized = cfg.eval.quantized_psnr;
            opts.train_seconds = artifacts.result.seconds;
            opts.config_hash = artifacts.config_hash;
            render::RenderSettings settings = cfg.render;
            settings.threads = cfg.threads;
            evalkit::EvalReport report = evalkit::evaluate(trained.state.model, settings,
                                                           views.test, cfg.out_dir, opts);
            row.mean_psnr = report.mean_psnr;
        } catch (const std::exception& e) {
            row.status = std::string("failed: ") + e.what();
        }
        rows.push_back(row);
        std::printf("[%s] %s  psnr=%.4f  %.1fs\n", row.status.c_str(), row.name.c_str(),
                    row.mean_psnr, row.train_seconds);
    }

    char buf[256];
    std::string csv = "variant,mean_psnr,train_seconds,status\n";
    std::string md = "| variant | mean PSNR (dB) | train seconds | status |\n"
                     "|---|---|---|---|\n";
    for (const BenchRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.3f,%s\n", r.name.c_str(), r.mean_psnr,
                      r.train_seconds, r.status.c_str());
        csv += buf;
        std::snprintf(buf, sizeof(buf), "| %s | %.3f | %.1f | %s |\n", r.name.c_str(),
                      r.mean_psnr, r.train_seconds, r.status.c_str());
        md += buf;
    }
    io::atomic_write((fs::path(bench_dir) / "bench.csv").string(), csv);
    io::atomic_write((fs::path(bench_dir) / "bench.md").string(), md);
    std::printf("bench table in %s\n", bench_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fewt: factorized tensor radiance fields with frequency-masked few-shot "
                 "regularization"};
    app.footer(config_key_help());
    app.require_subcommand(1);

    std::string config_path, out_dir, ckpt_path, data_root, views_arg, matrix_path, mesh_out,
        scene_kind = "sphere";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    double mesh_iso = 0.0;
    int mesh_res = 0, scene_res = 100, scene_views = 8, scene_test_views = 12,
        scene_samples = 1024;
    std::uint64_t scene_seed = 0;

    std::string resume_path;
    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--set", overrides, "override a config key (key.path=value)");
    train->add_option("--out", out_dir, "output directory (overrides out_dir)");
    train->add_option("--seed", seed, "seed override");
    train->add_option("--resume", resume_path, "continue from a checkpoint");

    auto* eval = app.add_subcommand("eval", "render held-out views and report PSNR");
    eval->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    eval->add_option("--data", data_root, "dataset root (overrides the embedded config)");
    eval->add_option("--out", out_dir, "report directory");
    eval->add_option("--set", overrides, "override a config key");
    eval->add_option("--views", views_arg, "comma-separated test view ids");

    auto* bench = app.add_subcommand("bench", "train and evaluate a matrix of variants");
    bench->add_option("--config", matrix_path, "bench matrix JSON")->required();
    bench->add_option("--out", out_dir, "bench output directory");
    bench->add_option("--seed", seed, "seed override for every variant");

    auto* mesh_cmd = app.add_subcommand("mesh", "export a density iso-surface as binary STL");
    mesh_cmd->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    mesh_cmd->add_option("--out", mesh_out, "output STL path")->required();
    mesh_cmd->add_option("--iso", mesh_iso, "iso value (default from config)");
    mesh_cmd->add_option("--resolution", mesh_res, "marching cubes resolution per axis");

    auto* make_scene = app.add_subcommand("make-scene", "generate an analytic posed dataset");
    make_scene->add_option("--kind", scene_kind, "sphere or boxes");
    make_scene->add_option("--resolution", scene_res, "image resolution");
    make_scene->add_option("--views", scene_views, "training view count");
    make_scene->add_option("--test-views", scene_test_views, "test view count");
    make_scene->add_option("--seed", scene_seed, "scene seed");
    make_scene->add_option("--samples", scene_samples, "quadrature samples per ray");
    make_scene->add_option("--out", out_dir, "scene directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(config_path, overrides, out_dir, seed, resume_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_root, out_dir, overrides, views_arg);
        if (bench->parsed()) return cmd_bench(matrix_path, out_dir, seed);
        if (mesh_cmd->parsed()) return cmd_mesh(ckpt_path, mesh_out, mesh_iso, mesh_res);
        if (make_scene->parsed())
            return cmd_make_scene(scene_kind, scene_res, scene_views, scene_test_views,
                                  scene_seed, scene_samples, out_dir);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
