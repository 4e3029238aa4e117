#include "fewt/config.hpp"

#include <stdexcept>

#include "fewt/io.hpp"

using json = nlohmann::json;

namespace fewt::config {

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error("config key '" + key + "' must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json mask_json(const freq_mask::MaskSchedule& m) {
    return {{"mode", m.mode == freq_mask::MaskMode::Dynamic ? "dynamic" : "fixed_ratio"},
            {"total_iters", m.total_reg_iters},
            {"v_ratio", m.v_ratio}};
}

freq_mask::MaskSchedule mask_from(const json& j, const std::string& key) {
    freq_mask::MaskSchedule m;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "dynamic")
        m.mode = freq_mask::MaskMode::Dynamic;
    else if (mode == "fixed_ratio")
        m.mode = freq_mask::MaskMode::FixedRatio;
    else
        throw std::runtime_error("config key '" + key + ".mode' must be dynamic or fixed_ratio");
    m.total_reg_iters = j.at("total_iters").get<int>();
    m.v_ratio = j.at("v_ratio").get<double>();
    if (m.v_ratio < 0.0 || m.v_ratio > 1.0)
        throw std::runtime_error("config key '" + key + ".v_ratio' must be in [0,1]");
    return m;
}

void check_unknown_keys(const json& doc, const json& defaults, const std::string& prefix) {
    if (!doc.is_object()) return;
    for (const auto& [key, value] : doc.items()) {
        std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!defaults.contains(key)) throw std::runtime_error("unknown config key: " + path);
        if (value.is_object()) check_unknown_keys(value, defaults.at(key), path);
    }
}

// Fill missing keys from defaults (deep merge, user values win).
json merge_defaults(const json& defaults, const json& doc) {
    json out = defaults;
    for (const auto& [key, value] : doc.items()) {
        if (value.is_object() && defaults.contains(key) && defaults.at(key).is_object())
            out[key] = merge_defaults(defaults.at(key), value);
        else
            out[key] = value;
    }
    return out;
}

}  // namespace

json default_json() { return to_json(RunConfig{}); }

json to_json(const RunConfig& cfg) {
    json upsample = json::array();
    for (const auto& [iter, res] : cfg.train.upsample_schedule)
        upsample.push_back(json::array({iter, json::array({res[0], res[1], res[2]})}));

    return {
        {"seed", cfg.seed},
        {"threads", cfg.threads},
        {"out_dir", cfg.out_dir},
        {"dataset",
         {{"root", cfg.dataset.root},
          {"background", vec3_json(cfg.dataset.background)},
          {"downscale", cfg.dataset.downscale},
          {"train_views", cfg.dataset.train_views},
          {"train_view_count", cfg.dataset.train_view_count},
          {"test_views", cfg.dataset.test_views},
          {"test_view_count", cfg.dataset.test_view_count}}},
        {"model",
         {{"factorization", cfg.model.factorization == grid::Factorization::VM ? "vm" : "cp"},
          {"resolution",
           json::array({cfg.model.resolution[0], cfg.model.resolution[1],
                        cfg.model.resolution[2]})},
          {"aabb_min", vec3_json(cfg.model.aabb_min)},
          {"aabb_max", vec3_json(cfg.model.aabb_max)},
          {"rank_density", cfg.model.rank_density},
          {"rank_appearance", cfg.model.rank_appearance},
          {"feature_dim", cfg.model.feature_dim},
          {"density_activation",
           cfg.model.density_activation == grid::DensityActivation::Softplus ? "softplus"
                                                                             : "relu"},
          {"init_scale_density", cfg.model.init_scale_density},
          {"init_scale_appearance", cfg.model.init_scale_appearance},
          {"decoder_hidden", cfg.model.decoder_hidden},
          {"n_freq_features", cfg.model.n_freq_features},
          {"n_freq_dir", cfg.model.n_freq_dir}}},
        {"render",
         {{"n_samples", cfg.render.n_samples},
          {"jitter", cfg.render.jitter},
          {"background", vec3_json(cfg.render.background)},
          {"near", cfg.render.near},
          {"far", cfg.render.far},
          {"min_transmittance", cfg.render.min_transmittance},
          {"weight_cutoff", cfg.render.weight_cutoff},
          {"occlusion_samples", cfg.render.occlusion_samples}}},
        {"train",
         {{"iterations", cfg.train.iterations},
          {"ray_batch_size", cfg.train.ray_batch_size},
          {"lr_grid", cfg.train.lr_grid},
          {"lr_mlp", cfg.train.lr_mlp},
          {"lr_decay_enabled", cfg.train.lr_decay_enabled},
          {"lr_decay", cfg.train.lr_decay},
          {"adam_beta1", cfg.train.adam_beta1},
          {"adam_beta2", cfg.train.adam_beta2},
          {"adam_eps", cfg.train.adam_eps},
          {"lambda_occ", cfg.train.lambda_occ},
          {"lambda_l1", cfg.train.lambda_l1},
          {"checkpoint_interval", cfg.train.checkpoint_interval},
          {"upsample", upsample},
          {"masks",
           {{"enabled", cfg.masks.enabled},
            {"density", mask_json(cfg.masks.density)},
            {"appearance", mask_json(cfg.masks.appearance)},
            {"encoding", mask_json(cfg.masks.encoding)}}}}},
        {"eval", {{"quantized_psnr", cfg.eval.quantized_psnr}}},
        {"mesh", {{"iso", cfg.mesh.iso}, {"resolution", cfg.mesh.resolution}}},
    };
}

RunConfig from_json(const json& doc) {
    json defaults = default_json();
    check_unknown_keys(doc, defaults, "");
    json full = merge_defaults(defaults, doc);

    RunConfig cfg;
    cfg.seed = full.at("seed").get<std::uint64_t>();
    cfg.threads = full.at("threads").get<int>();
    cfg.out_dir = full.at("out_dir").get<std::string>();

    const json& ds = full.at("dataset");
    cfg.dataset.root = ds.at("root").get<std::string>();
    cfg.dataset.background = vec3_from(ds.at("background"), "dataset.background");
    cfg.dataset.downscale = ds.at("downscale").get<int>();
    cfg.dataset.train_views = ds.at("train_views").get<std::vector<int>>();
    cfg.dataset.train_view_count = ds.at("train_view_count").get<int>();
    cfg.dataset.test_views = ds.at("test_views").get<std::vector<int>>();
    cfg.dataset.test_view_count = ds.at("test_view_count").get<int>();
    if (cfg.dataset.downscale < 1) throw std::runtime_error("dataset.downscale must be >= 1");

    const json& md = full.at("model");
    std::string fact = md.at("factorization").get<std::string>();
    if (fact == "vm")
        cfg.model.factorization = grid::Factorization::VM;
    else if (fact == "cp")
        cfg.model.factorization = grid::Factorization::CP;
    else
        throw std::runtime_error("model.factorization must be vm or cp");
    const json& res = md.at("resolution");
    if (!res.is_array() || res.size() != 3)
        throw std::runtime_error("model.resolution must be an array of 3 integers");
    for (int a = 0; a < 3; ++a) cfg.model.resolution[static_cast<size_t>(a)] = res[static_cast<size_t>(a)].get<int>();
    cfg.model.aabb_min = vec3_from(md.at("aabb_min"), "model.aabb_min");
    cfg.model.aabb_max = vec3_from(md.at("aabb_max"), "model.aabb_max");
    cfg.model.rank_density = md.at("rank_density").get<int>();
    cfg.model.rank_appearance = md.at("rank_appearance").get<int>();
    cfg.model.feature_dim = md.at("feature_dim").get<int>();
    std::string act = md.at("density_activation").get<std::string>();
    if (act == "softplus")
        cfg.model.density_activation = grid::DensityActivation::Softplus;
    else if (act == "relu")
        cfg.model.density_activation = grid::DensityActivation::Relu;
    else
        throw std::runtime_error("model.density_activation must be softplus or relu");
    cfg.model.init_scale_density = md.at("init_scale_density").get<double>();
    cfg.model.init_scale_appearance = md.at("init_scale_appearance").get<double>();
    cfg.model.decoder_hidden = md.at("decoder_hidden").get<std::vector<int>>();
    cfg.model.n_freq_features = md.at("n_freq_features").get<int>();
    cfg.model.n_freq_dir = md.at("n_freq_dir").get<int>();
    if (cfg.model.rank_density < 1 || cfg.model.rank_appearance < 1)
        throw std::runtime_error("model ranks must be >= 1");
    if (cfg.model.feature_dim < 3) throw std::runtime_error("model.feature_dim must be >= 3");
    if (cfg.model.n_freq_features < 1 || cfg.model.n_freq_dir < 1)
        throw std::runtime_error("model n_freq fields must be >= 1");

    const json& rd = full.at("render");
    cfg.render.n_samples = rd.at("n_samples").get<int>();
    cfg.render.jitter = rd.at("jitter").get<bool>();
    cfg.render.background = vec3_from(rd.at("background"), "render.background");
    cfg.render.near = rd.at("near").get<double>();
    cfg.render.far = rd.at("far").get<double>();
    cfg.render.min_transmittance = rd.at("min_transmittance").get<double>();
    cfg.render.weight_cutoff = rd.at("weight_cutoff").get<double>();
    cfg.render.occlusion_samples = rd.at("occlusion_samples").get<int>();
    cfg.render.threads = cfg.threads;
    if (cfg.render.n_samples < 2) throw std::runtime_error("render.n_samples must be >= 2");
    if (!(cfg.render.near > 0.0 && cfg.render.far > cfg.render.near))
        throw std::runtime_error("render near/far must satisfy 0 < near < far");

    const json& tr = full.at("train");
    cfg.train.iterations = tr.at("iterations").get<int>();
    cfg.train.ray_batch_size = tr.at("ray_batch_size").get<int>();
    cfg.train.lr_grid = tr.at("lr_grid").get<double>();
    cfg.train.lr_mlp = tr.at("lr_mlp").get<double>();
    cfg.train.lr_decay_enabled = tr.at("lr_decay_enabled").get<bool>();
    cfg.train.lr_decay = tr.at("lr_decay").get<double>();
    cfg.train.adam_beta1 = tr.at("adam_beta1").get<double>();
    cfg.train.adam_beta2 = tr.at("adam_beta2").get<double>();
    cfg.train.adam_eps = tr.at("adam_eps").get<double>();
    cfg.train.lambda_occ = tr.at("lambda_occ").get<double>();
    cfg.train.lambda_l1 = tr.at("lambda_l1").get<double>();
    cfg.train.checkpoint_interval = tr.at("checkpoint_interval").get<int>();
    cfg.train.seed = cfg.seed;
    if (cfg.train.iterations < 1) throw std::runtime_error("train.iterations must be >= 1");
    if (cfg.train.ray_batch_size < 1)
        throw std::runtime_error("train.ray_batch_size must be >= 1");
    if (cfg.train.lambda_occ < 0.0 || cfg.train.lambda_l1 < 0.0)
        throw std::runtime_error("loss weights must be >= 0");
    for (const auto& entry : tr.at("upsample")) {
        if (!entry.is_array() || entry.size() != 2 || !entry[1].is_array() ||
            entry[1].size() != 3)
            throw std::runtime_error("train.upsample entries must be [iteration, [nx,ny,nz]]");
        cfg.train.upsample_schedule.push_back(
            {entry[0].get<int>(),
             {entry[1][0].get<int>(), entry[1][1].get<int>(), entry[1][2].get<int>()}});
    }

    const json& mk = tr.at("masks");
    cfg.masks.enabled = mk.at("enabled").get<bool>();
    cfg.masks.density = mask_from(mk.at("density"), "train.masks.density");
    cfg.masks.appearance = mask_from(mk.at("appearance"), "train.masks.appearance");
    cfg.masks.encoding = mask_from(mk.at("encoding"), "train.masks.encoding");
    // A zero horizon means "90% of the training run".
    auto resolve_T = [&](freq_mask::MaskSchedule& m) {
        if (m.total_reg_iters <= 0)
            m.total_reg_iters = std::max(1, cfg.train.iterations * 9 / 10);
    };
    resolve_T(cfg.masks.density);
    resolve_T(cfg.masks.appearance);
    resolve_T(cfg.masks.encoding);

    cfg.eval.quantized_psnr = full.at("eval").at("quantized_psnr").get<bool>();
    cfg.mesh.iso = full.at("mesh").at("iso").get<double>();
    cfg.mesh.resolution = full.at("mesh").at("resolution").get<int>();
    return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("--set expects key.path=value, got: " + assignment);
    std::string path = assignment.substr(0, eq);
    std::string value_text = assignment.substr(eq + 1);

    json value;
    try {
        value = json::parse(value_text);
    } catch (const json::parse_error&) {
        value = value_text;  // bare word -> string
    }

    json* node = &doc;
    std::size_t start = 0;
    std::vector<std::string> keys;
    while (true) {
        std::size_t dot = path.find('.', start);
        keys.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json defaults = default_json();
    const json* def_node = &defaults;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        if (!def_node->contains(keys[i]))
            throw std::runtime_error("unknown config key: " + path);
        def_node = &def_node->at(keys[i]);
        node = &(*node)[keys[i]];
    }
    if (!def_node->contains(keys.back())) throw std::runtime_error("unknown config key: " + path);
    (*node)[keys.back()] = value;
}

RunConfig from_json_text(const std::string& text, const std::vector<std::string>& overrides) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    for (const std::string& o : overrides) apply_override(doc, o);
    return from_json(doc);
}

RunConfig load(const std::string& path, const std::vector<std::string>& overrides) {
    return from_json_text(io::read_file(path), overrides);
}

std::string canonical_text(const RunConfig& cfg) {
    // Output location and worker count do not change the experiment (results
    // are thread-count invariant), so they stay out of the fingerprint.
    json doc = to_json(cfg);
    doc.erase("out_dir");
    doc.erase("threads");
    return doc.dump();
}

std::string config_hash(const RunConfig& cfg) { return io::fnv1a_hex(canonical_text(cfg)); }

}  // namespace fewt::config
