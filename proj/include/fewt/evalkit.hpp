#pragma once

#include <string>
#include <vector>

#include "fewt/dataset.hpp"
#include "fewt/image.hpp"
#include "fewt/model.hpp"
#include "fewt/renderer.hpp"

namespace fewt::evalkit {

// 10 * log10(peak^2 / MSE) over all pixels and channels; identical images
// return +infinity.
double psnr(const img::Image& pred, const img::Image& gt, double peak = 1.0);

// Both images rounded to 8-bit levels first; for cross-checking numbers
// computed on quantized outputs.
double psnr_quantized(const img::Image& pred, const img::Image& gt);

struct EvalReport {
    std::vector<double> per_view_psnr;
    double mean_psnr = 0.0;
    double train_seconds = 0.0;
    std::string config_hash;
};

struct EvalOptions {
    bool quantized = false;
    bool write_images = true;
    double train_seconds = 0.0;
    std::string config_hash;
};

// Renders a single view (masks all-ones, deterministic midpoint sampling).
img::Image render_view(const Model& model, const render::RenderSettings& settings,
                       const dataset::CameraModel& camera);

// Renders every view of the split, computes PSNR against the stored images,
// and when out_dir is non-empty writes test_{index:03}.png, report.csv
// (view,psnr) and report.json (mean, time, config hash).
EvalReport evaluate(const Model& model, const render::RenderSettings& settings,
                    const std::vector<dataset::PosedImage>& split, const std::string& out_dir,
                    const EvalOptions& options);

std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace fewt::evalkit
