#include "fewt/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "fewt/io.hpp"
#include "fewt/threading.hpp"

namespace fs = std::filesystem;

namespace fewt::evalkit {

namespace {

double mse(const img::Image& a, const img::Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("psnr: image shapes differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.rgb.size());
}

}  // namespace

double psnr(const img::Image& pred, const img::Image& gt, double peak) {
    double err = mse(pred, gt);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / err);
}

double psnr_quantized(const img::Image& pred, const img::Image& gt) {
    auto quantize = [](const img::Image& src) {
        img::Image out = src;
        for (float& v : out.rgb)
            v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
        return out;
    };
    return psnr(quantize(pred), quantize(gt));
}

img::Image render_view(const Model& model, const render::RenderSettings& settings,
                       const dataset::CameraModel& camera) {
    // Full model at evaluation time: every mask is all-ones, which is the
    // mask-free path.
    Model eval_model = model;
    eval_model.masks.enabled = false;
    render::RenderSettings s = settings;
    s.jitter = false;

    img::Image out(camera.width, camera.height);
    parallel_blocks(
        static_cast<std::size_t>(camera.height), 1, worker_count(settings.threads),
        [&](std::size_t v, std::size_t, std::size_t, int) {
            std::vector<render::Ray> rays;
            rays.reserve(static_cast<size_t>(camera.width));
            for (int u = 0; u < camera.width; ++u)
                rays.push_back(dataset::generate_ray(camera, u, static_cast<int>(v), s.near,
                                                     s.far));
            render::RenderSettings row_settings = s;
            row_settings.threads = 1;  // already parallel over rows
            auto res = render::render_batch(eval_model, row_settings, rays, 0, 0);
            for (int u = 0; u < camera.width; ++u)
                for (int c = 0; c < 3; ++c)
                    out.at(u, static_cast<int>(v), c) =
                        static_cast<float>(res.colors[static_cast<size_t>(u)][c]);
        });
    return out;
}

EvalReport evaluate(const Model& model, const render::RenderSettings& settings,
                    const std::vector<dataset::PosedImage>& split, const std::string& out_dir,
                    const EvalOptions& options) {
    if (split.empty()) throw std::invalid_argument("evaluate: empty split");
    EvalReport report;
    report.train_seconds = options.train_seconds;
    report.config_hash = options.config_hash;

    if (!out_dir.empty()) fs::create_directories(out_dir);
    for (std::size_t i = 0; i < split.size(); ++i) {
        img::Image rendered = render_view(model, settings, split[i].camera);
        double value = options.quantized ? psnr_quantized(rendered, split[i].image)
                                         : psnr(rendered, split[i].image);
        report.per_view_psnr.push_back(value);
        if (!out_dir.empty() && options.write_images) {
            char name[32];
            std::snprintf(name, sizeof(name), "test_%03zu.png", i);
            img::write_png((fs::path(out_dir) / name).string(), rendered);
        }
    }
    double sum = 0.0;
    for (double v : report.per_view_psnr) sum += v;
    report.mean_psnr = sum / static_cast<double>(report.per_view_psnr.size());

    if (!out_dir.empty()) {
        io::atomic_write((fs::path(out_dir) / "report.csv").string(), report_csv(report));
        io::atomic_write((fs::path(out_dir) / "report.json").string(), report_json(report));
    }
    return report;
}

namespace {

std::string format_db(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
    std::string out = "view,psnr\n";
    for (std::size_t i = 0; i < report.per_view_psnr.size(); ++i)
        out += std::to_string(i) + "," + format_db(report.per_view_psnr[i]) + "\n";
    return out;
}

std::string report_json(const EvalReport& report) {
    // Hand-assembled so +inf serializes as the string "inf".
    std::string out = "{\n";
    out += "  \"mean_psnr\": " +
           (std::isinf(report.mean_psnr) ? std::string("\"inf\"") : format_db(report.mean_psnr)) +
           ",\n";
    out += "  \"train_seconds\": " + format_db(report.train_seconds) + ",\n";
    out += "  \"config_hash\": \"" + report.config_hash + "\",\n";
    out += "  \"per_view_psnr\": [";
    for (std::size_t i = 0; i < report.per_view_psnr.size(); ++i) {
        if (i) out += ", ";
        double v = report.per_view_psnr[i];
        out += std::isinf(v) ? std::string("\"inf\"") : format_db(v);
    }
    out += "]\n}\n";
    return out;
}

}  // namespace fewt::evalkit
