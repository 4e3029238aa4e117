#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fewt/geometry.hpp"
#include "fewt/model.hpp"
#include "fewt/rng.hpp"

namespace fewt::render {

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
    double near = 2.0;
    double far = 6.0;
};

// Discretized ray: strictly increasing positions, positive interval lengths,
// post-activation densities, colors in [0,1]^3.
struct SampleSet {
    std::vector<double> t;
    std::vector<double> delta;
    std::vector<double> sigma;
    std::vector<Vec3> color;

    std::size_t size() const { return t.size(); }
};

struct RenderSettings {
    int n_samples = 128;
    bool jitter = true;
    Vec3 background{1.0, 1.0, 1.0};
    // Default ray segment handed to ray builders; the AABB clip still applies.
    double near = 2.0;
    double far = 6.0;
    // Early ray termination threshold; 0 disables. Occlusion and compositing
    // then run over the evaluated prefix only.
    double min_transmittance = 1e-4;
    // Samples whose compositing weight T*alpha falls at or below this bound
    // skip appearance shading and contribute no color (their density still
    // shapes the weights). 0 restores exact shading of every nonzero-alpha
    // sample; gradient checks use 0.
    double weight_cutoff = 1e-4;
    int occlusion_samples = 0;  // 0 -> max(1, n_samples / 10)
    int threads = 0;            // 0 -> hardware concurrency (FEWT_THREADS caps)
};

int effective_occlusion_samples(const RenderSettings& s);

// Stratified positions over the ray's [near, far] clipped against the AABB;
// with jitter each sample moves uniformly within its stratum, otherwise it
// sits at the stratum midpoint. Deltas are the stratum widths. Returns false
// (empty outputs) when the ray misses the box.
bool sample_ray(const Ray& ray, const Aabb& box, int n_samples, bool jitter, Rng& rng,
                std::vector<double>& ts, std::vector<double>& deltas);

struct CompositeResult {
    Vec3 color;
    double opacity = 0.0;
};

// Emission-absorption quadrature: alpha_i = 1 - exp(-sigma_i * delta_i),
// w_i = T_i * alpha_i with T_i the accumulated transmittance, color =
// sum w_i c_i + (1 - sum w_i) * background.
CompositeResult composite(const SampleSet& samples, const Vec3& background,
                          std::vector<double>* weights = nullptr);

// Mean post-activation density over the first min(K, n) samples of each ray,
// averaged over the batch. Rays with no samples contribute zero.
double occlusion_loss(std::span<const SampleSet> batch, int near_region_samples);

struct RenderOutputs {
    std::vector<Vec3> colors;
    std::vector<double> opacities;
    double occlusion = 0.0;
};

// Full pipeline per ray: stratified sampling, masked density, masked
// appearance features, masked positional encoding, decoder, compositing.
// Masks come from model.masks_at(t); a disabled mask set skips every mask
// multiplication (the mask-free code path).
RenderOutputs render_batch(const Model& model, const RenderSettings& settings,
                           std::span<const Ray> rays, int t, std::uint64_t sample_seed);

// dL/d(color) of one ray, given its index and predicted color.
using ColorGradFn = std::function<Vec3(std::size_t, const Vec3&)>;

// Forward pass plus analytic backward. Per-ray upstream color gradients come
// from color_grad; occ_upstream is dL/d(occlusion term). Gradients accumulate
// into grads (caller-owned). Per-block accumulation merged in block order
// keeps results bitwise reproducible for any worker count.
RenderOutputs render_batch_grad(const Model& model, const RenderSettings& settings,
                                std::span<const Ray> rays, int t, std::uint64_t sample_seed,
                                const ColorGradFn& color_grad, double occ_upstream,
                                GradBuffer& grads);

// Deterministic per-ray sampling stream: mixes the batch seed with the ray
// index so results do not depend on scheduling.
std::uint64_t ray_stream_seed(std::uint64_t sample_seed, std::uint64_t ray_index);

}  // namespace fewt::render
