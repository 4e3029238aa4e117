#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewt/model.hpp"
#include "fewt/renderer.hpp"
#include "fewt/trainer.hpp"

namespace fewt::config {

struct DatasetConfig {
    std::string root;
    Vec3 background{1.0, 1.0, 1.0};
    int downscale = 1;
    std::vector<int> train_views;  // explicit ids; empty -> train_view_count
    int train_view_count = 0;      // 0 -> all views
    std::vector<int> test_views;
    int test_view_count = 0;
};

struct EvalConfig {
    bool quantized_psnr = false;
};

struct MeshConfig {
    double iso = 25.0;
    int resolution = 64;
};

// The whole run in one document; every field has a default and unknown keys
// are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out_dir = "runs/out";
    DatasetConfig dataset;
    ModelConfig model;
    render::RenderSettings render;
    trainer::TrainConfig train;
    MaskSet masks;
    EvalConfig eval;
    MeshConfig mesh;
};

nlohmann::json default_json();
nlohmann::json to_json(const RunConfig& cfg);

// Validates against the default tree (unknown keys are errors naming the
// offending path) and resolves derived defaults: mask horizons of 0 become
// 90% of train.iterations.
RunConfig from_json(const nlohmann::json& doc);

// "a.b.c=value" with the value parsed as JSON (bare words fall back to
// strings). The path must exist in the default tree.
void apply_override(nlohmann::json& doc, const std::string& assignment);

RunConfig load(const std::string& path, const std::vector<std::string>& overrides);
RunConfig from_json_text(const std::string& text, const std::vector<std::string>& overrides);

// Canonical dump used for hashing and checkpoint embedding; out_dir and
// threads are excluded (they do not affect results).
std::string canonical_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

}  // namespace fewt::config
