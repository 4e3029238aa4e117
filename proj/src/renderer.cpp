#include "fewt/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "fewt/threading.hpp"

namespace fewt::render {

int effective_occlusion_samples(const RenderSettings& s) {
    if (s.occlusion_samples > 0) return s.occlusion_samples;
    return std::max(1, s.n_samples / 10);
}

std::uint64_t ray_stream_seed(std::uint64_t sample_seed, std::uint64_t ray_index) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = sample_seed + 0x9e3779b97f4a7c15ull * (ray_index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

bool sample_ray(const Ray& ray, const Aabb& box, int n_samples, bool jitter, Rng& rng,
                std::vector<double>& ts, std::vector<double>& deltas) {
    ts.clear();
    deltas.clear();
    if (n_samples < 2) return false;

    double t_enter = 0.0, t_exit = 0.0;
    if (!intersect_aabb(box, ray.origin, ray.direction, t_enter, t_exit)) return false;
    double t0 = std::max(ray.near, t_enter);
    double t1 = std::min(ray.far, t_exit);
    if (!(t1 > t0)) return false;

    double stratum = (t1 - t0) / n_samples;
    ts.reserve(static_cast<size_t>(n_samples));
    deltas.assign(static_cast<size_t>(n_samples), stratum);
    for (int i = 0; i < n_samples; ++i) {
        double offset = jitter ? rng.uniform() : 0.5;
        ts.push_back(t0 + (i + offset) * stratum);
    }
    return true;
}

CompositeResult composite(const SampleSet& samples, const Vec3& background,
                          std::vector<double>* weights) {
    CompositeResult out;
    if (weights) weights->assign(samples.size(), 0.0);
    double transmittance = 1.0;
    Vec3 acc{0.0, 0.0, 0.0};
    double opacity = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double alpha = 1.0 - std::exp(-samples.sigma[i] * samples.delta[i]);
        double w = transmittance * alpha;
        acc += w * samples.color[i];
        opacity += w;
        if (weights) (*weights)[i] = w;
        transmittance *= 1.0 - alpha;
    }
    out.color = acc + (1.0 - opacity) * background;
    out.opacity = opacity;
    return out;
}

double occlusion_loss(std::span<const SampleSet> batch, int near_region_samples) {
    if (batch.empty() || near_region_samples < 1) return 0.0;
    double total = 0.0;
    for (const SampleSet& s : batch) {
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(near_region_samples),
                                              s.size());
        if (k == 0) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += s.sigma[i];
        total += sum / static_cast<double>(k);
    }
    return total / static_cast<double>(batch.size());
}

namespace {

constexpr std::size_t kRayBlockSize = 64;

// Per-worker scratch; contents never affect results, only allocations.
struct RayWorkspace {
    std::vector<double> ts;
    std::vector<double> sigma_raw;   // evaluated prefix
    std::vector<double> alpha;
    std::vector<double> trans;       // transmittance before each sample
    std::vector<int> active_of;      // sample -> active ordinal or -1
    std::vector<int> active_sample;  // active ordinal -> sample index
    std::vector<double> comps_d;
    std::vector<double> comps_a;     // active-major [A x Ca]
    std::vector<double> feats;       // active-major [A x P], masked features
    std::vector<double> enc;         // active-major [A x in_dim]
    std::vector<double> dcomps_d;
    std::vector<double> dcomps_a;
    std::vector<double> dfeat_masked;
    std::vector<double> dfeat;
    std::vector<double> upstream_rgb;
    std::vector<double> denc;
    std::vector<double> dir_enc;  // per-ray cache: direction is constant
    decoder::Decoder::Workspace mlp;
};

struct RayForward {
    bool hit = false;
    int evaluated = 0;   // samples walked before early termination
    double stratum = 0.0;
    double occ_sum = 0.0;  // mean sigma over the near region
    int occ_count = 0;
    Vec3 color;
    double opacity = 0.0;
};

struct Pipeline {
    const Model& model;
    const RenderSettings& settings;
    const MaskValues masks;
    const int comp_d;
    const int comp_a;
    const int feature_dim;
    const int enc_feat_len;   // full feature encoding block incl. raw copy
    const int enc_dir_len;
    const int input_dim;
    const int occ_k;
    const Aabb box;
    const decoder::Decoder::Plan plan;

    Pipeline(const Model& m, const RenderSettings& s, int t)
        : model(m),
          settings(s),
          masks(m.masks_at(t)),
          comp_d(m.density.factors.component_count()),
          comp_a(m.appearance.factors.component_count()),
          feature_dim(m.appearance.feature_dim),
          enc_feat_len(freq_mask::encoding_length(m.appearance.feature_dim, m.n_freq_features)),
          enc_dir_len(freq_mask::encoding_length(3, m.n_freq_dir)),
          input_dim(m.decoder_input_dim()),
          occ_k(effective_occlusion_samples(s)),
          box(m.density.factors.geometry().aabb()),
          plan(m.decoder.make_plan()) {}

    std::span<const double> enc_mask_feat() const {
        if (masks.encoding.empty()) return {};
        return {masks.encoding.data(), static_cast<std::size_t>(enc_feat_len - feature_dim)};
    }
    std::span<const double> enc_mask_dir() const {
        if (masks.encoding.empty()) return {};
        return {masks.encoding.data() + (enc_feat_len - feature_dim),
                static_cast<std::size_t>(enc_dir_len - 3)};
    }

    RayForward forward(const Ray& ray, std::uint64_t stream_seed, RayWorkspace& ws) const {
        RayForward out;
        out.color = settings.background;

        Rng rng(stream_seed);
        std::vector<double> deltas_unused;
        if (!sample_ray(ray, box, settings.n_samples, settings.jitter, rng, ws.ts,
                        deltas_unused))
            return out;
        out.hit = true;
        out.stratum = deltas_unused[0];

        ws.dir_enc.resize(static_cast<size_t>(enc_dir_len));
        std::array<double, 3> d{ray.direction.x, ray.direction.y, ray.direction.z};
        freq_mask::positional_encoding(d, model.n_freq_dir, enc_mask_dir(), ws.dir_enc);

        const int n = settings.n_samples;
        ws.sigma_raw.resize(static_cast<size_t>(n));
        ws.alpha.resize(static_cast<size_t>(n));
        ws.trans.resize(static_cast<size_t>(n));
        ws.active_of.assign(static_cast<size_t>(n), -1);
        ws.active_sample.clear();
        ws.comps_d.resize(static_cast<size_t>(comp_d));
        ws.comps_a.clear();
        ws.feats.clear();
        ws.enc.clear();

        double transmittance = 1.0;
        int evaluated = 0;
        for (int i = 0; i < n; ++i) {
            Vec3 x = ray.origin + ray.direction * ws.ts[static_cast<size_t>(i)];
            double raw = 0.0;
            if (box.contains(x)) {
                model.density.factors.eval_components(x, ws.comps_d);
                if (masks.density.empty()) {
                    for (int c = 0; c < comp_d; ++c) raw += ws.comps_d[static_cast<size_t>(c)];
                } else {
                    for (int c = 0; c < comp_d; ++c)
                        raw += masks.density[static_cast<size_t>(c)] *
                               ws.comps_d[static_cast<size_t>(c)];
                }
            }
            double sigma = grid::activate_density(raw, model.density.activation);
            double a = 1.0 - std::exp(-sigma * out.stratum);

            ws.sigma_raw[static_cast<size_t>(i)] = raw;
            ws.alpha[static_cast<size_t>(i)] = a;
            ws.trans[static_cast<size_t>(i)] = transmittance;
            if (i < occ_k) {
                out.occ_sum += sigma;
                out.occ_count += 1;
            }
            if (a > 0.0 && transmittance * a > settings.weight_cutoff) {
                ws.active_of[static_cast<size_t>(i)] = static_cast<int>(ws.active_sample.size());
                ws.active_sample.push_back(i);
                append_color_inputs(x, ws);
            }
            transmittance *= 1.0 - a;
            ++evaluated;
            if (settings.min_transmittance > 0.0 && transmittance < settings.min_transmittance)
                break;
        }
        out.evaluated = evaluated;

        // One decoder pass over this ray's shaded samples.
        const int n_active = static_cast<int>(ws.active_sample.size());
        if (n_active > 0) model.decoder.forward_batch(ws.enc, n_active, ws.mlp, &plan);
        const std::vector<double>* rgb =
            n_active > 0 ? &ws.mlp.acts.back() : nullptr;

        Vec3 acc{0.0, 0.0, 0.0};
        double opacity = 0.0;
        for (int i = 0; i < evaluated; ++i) {
            double w = ws.trans[static_cast<size_t>(i)] * ws.alpha[static_cast<size_t>(i)];
            int a_idx = ws.active_of[static_cast<size_t>(i)];
            if (a_idx >= 0) {
                const double* c = rgb->data() + static_cast<std::size_t>(a_idx) * 3;
                acc += w * Vec3{c[0], c[1], c[2]};
            }
            opacity += w;
        }
        out.color = acc + (1.0 - opacity) * settings.background;
        out.opacity = opacity;
        return out;
    }

    void append_color_inputs(const Vec3& x, RayWorkspace& ws) const {
        std::size_t a = ws.active_sample.size() - 1;
        ws.comps_a.resize((a + 1) * static_cast<std::size_t>(comp_a));
        ws.feats.resize((a + 1) * static_cast<std::size_t>(feature_dim));
        ws.enc.resize((a + 1) * static_cast<std::size_t>(input_dim));

        double* comps = ws.comps_a.data() + a * static_cast<std::size_t>(comp_a);
        double* feat = ws.feats.data() + a * static_cast<std::size_t>(feature_dim);
        double* enc_row = ws.enc.data() + a * static_cast<std::size_t>(input_dim);

        std::span<double> comps_span{comps, static_cast<std::size_t>(comp_a)};
        if (box.contains(x)) {
            model.appearance.factors.eval_components(x, comps_span);
        } else {
            std::fill(comps_span.begin(), comps_span.end(), 0.0);
        }
        std::fill(feat, feat + feature_dim, 0.0);
        for (int c = 0; c < comp_a; ++c) {
            double w = comps[c];
            if (w == 0.0) continue;
            auto b = model.appearance.basis_vector(c);
            for (int p = 0; p < feature_dim; ++p) feat[p] += w * b[static_cast<size_t>(p)];
        }
        if (!masks.appearance.empty()) {
            for (int p = 0; p < feature_dim; ++p) feat[p] *= masks.appearance[static_cast<size_t>(p)];
        }

        freq_mask::positional_encoding({feat, static_cast<std::size_t>(feature_dim)},
                                       model.n_freq_features, enc_mask_feat(),
                                       {enc_row, static_cast<std::size_t>(enc_feat_len)});
        std::copy(ws.dir_enc.begin(), ws.dir_enc.end(), enc_row + enc_feat_len);
    }

    // Backward for one ray; forward state must still be in ws.
    void backward(const Ray& ray, const RayForward& fwd, const Vec3& dcolor, double docc_per_sample,
                  RayWorkspace& ws, GradBuffer& grads) const {
        if (!fwd.hit || fwd.evaluated == 0) return;
        const int n_active = static_cast<int>(ws.active_sample.size());
        const std::vector<double>* rgb = n_active > 0 ? &ws.mlp.acts.back() : nullptr;

        ws.dcomps_d.assign(static_cast<size_t>(comp_d), 0.0);
        ws.upstream_rgb.assign(static_cast<std::size_t>(n_active) * 3, 0.0);

        // Compositing backward, walking the evaluated prefix in reverse and
        // carrying d(loss)/d(transmittance) so no division by (1 - alpha) is
        // needed even for saturated samples.
        double d_trans_next = 0.0;
        for (int i = fwd.evaluated - 1; i >= 0; --i) {
            double a = ws.alpha[static_cast<size_t>(i)];
            double ti = ws.trans[static_cast<size_t>(i)];
            Vec3 ci{0.0, 0.0, 0.0};
            int a_idx = ws.active_of[static_cast<size_t>(i)];
            if (a_idx >= 0) {
                const double* c = rgb->data() + static_cast<std::size_t>(a_idx) * 3;
                ci = {c[0], c[1], c[2]};
            }
            double dw = dot(dcolor, ci - settings.background);
            double da = (dw - d_trans_next) * ti;
            d_trans_next = dw * a + d_trans_next * (1.0 - a);

            double dsigma = da * fwd.stratum * (1.0 - a);
            if (i < fwd.occ_count && fwd.occ_count > 0)
                dsigma += docc_per_sample / fwd.occ_count;
            double draw = dsigma * grid::activate_density_grad(
                                       ws.sigma_raw[static_cast<size_t>(i)],
                                       model.density.activation);
            if (draw != 0.0) {
                Vec3 x = ray.origin + ray.direction * ws.ts[static_cast<size_t>(i)];
                if (box.contains(x)) {
                    if (masks.density.empty()) {
                        std::fill(ws.dcomps_d.begin(), ws.dcomps_d.end(), draw);
                    } else {
                        for (int c = 0; c < comp_d; ++c)
                            ws.dcomps_d[static_cast<size_t>(c)] =
                                draw * masks.density[static_cast<size_t>(c)];
                    }
                    model.density.factors.grad_components(x, ws.dcomps_d, grads.density);
                }
            }
            if (a_idx >= 0) {
                double w = ti * a;
                double* up = ws.upstream_rgb.data() + static_cast<std::size_t>(a_idx) * 3;
                up[0] = dcolor.x * w;
                up[1] = dcolor.y * w;
                up[2] = dcolor.z * w;
            }
        }

        if (n_active == 0) return;

        ws.denc.assign(static_cast<std::size_t>(n_active) * input_dim, 0.0);
        model.decoder.backward_batch(ws.enc, n_active, ws.mlp, ws.upstream_rgb, grads.decoder,
                                     ws.denc);

        ws.dfeat_masked.resize(static_cast<size_t>(feature_dim));
        ws.dfeat.resize(static_cast<size_t>(feature_dim));
        ws.dcomps_a.resize(static_cast<size_t>(comp_a));
        for (int a = 0; a < n_active; ++a) {
            const double* feat = ws.feats.data() + static_cast<std::size_t>(a) * feature_dim;
            const double* denc_row = ws.denc.data() + static_cast<std::size_t>(a) * input_dim;

            std::fill(ws.dfeat_masked.begin(), ws.dfeat_masked.end(), 0.0);
            freq_mask::positional_encoding_backward(
                {feat, static_cast<std::size_t>(feature_dim)}, model.n_freq_features,
                enc_mask_feat(), {denc_row, static_cast<std::size_t>(enc_feat_len)},
                ws.dfeat_masked);
            // Through the appearance feature mask.
            for (int p = 0; p < feature_dim; ++p)
                ws.dfeat[static_cast<size_t>(p)] =
                    masks.appearance.empty()
                        ? ws.dfeat_masked[static_cast<size_t>(p)]
                        : ws.dfeat_masked[static_cast<size_t>(p)] *
                              masks.appearance[static_cast<size_t>(p)];

            const double* comps = ws.comps_a.data() + static_cast<std::size_t>(a) * comp_a;
            for (int c = 0; c < comp_a; ++c) {
                auto b = model.appearance.basis_vector(c);
                double dc = 0.0;
                double* gb = grads.basis.data() + static_cast<std::size_t>(c) * feature_dim;
                for (int p = 0; p < feature_dim; ++p) {
                    dc += b[static_cast<size_t>(p)] * ws.dfeat[static_cast<size_t>(p)];
                    gb[p] += comps[c] * ws.dfeat[static_cast<size_t>(p)];
                }
                ws.dcomps_a[static_cast<size_t>(c)] = dc;
            }
            int sample = ws.active_sample[static_cast<size_t>(a)];
            Vec3 x = ray.origin + ray.direction * ws.ts[static_cast<size_t>(sample)];
            if (box.contains(x))
                model.appearance.factors.grad_components(x, ws.dcomps_a, grads.appearance);
        }
    }
};

}  // namespace

RenderOutputs render_batch(const Model& model, const RenderSettings& settings,
                           std::span<const Ray> rays, int t, std::uint64_t sample_seed) {
    Pipeline pipe(model, settings, t);
    RenderOutputs out;
    out.colors.assign(rays.size(), settings.background);
    out.opacities.assign(rays.size(), 0.0);
    if (rays.empty()) return out;

    int workers = worker_count(settings.threads);
    std::size_t n_blocks = (rays.size() + kRayBlockSize - 1) / kRayBlockSize;
    std::vector<double> block_occ(n_blocks, 0.0);
    std::vector<RayWorkspace> scratch(static_cast<size_t>(workers));

    parallel_blocks(rays.size(), kRayBlockSize, workers,
                    [&](std::size_t block, std::size_t begin, std::size_t end, int slot) {
                        RayWorkspace& ws = scratch[static_cast<size_t>(slot)];
                        double occ = 0.0;
                        for (std::size_t i = begin; i < end; ++i) {
                            RayForward f = pipe.forward(rays[i],
                                                        ray_stream_seed(sample_seed, i), ws);
                            out.colors[i] = f.color;
                            out.opacities[i] = f.opacity;
                            if (f.occ_count > 0) occ += f.occ_sum / f.occ_count;
                        }
                        block_occ[block] = occ;
                    });

    double occ_total = 0.0;
    for (double o : block_occ) occ_total += o;
    out.occlusion = occ_total / static_cast<double>(rays.size());
    return out;
}

RenderOutputs render_batch_grad(const Model& model, const RenderSettings& settings,
                                std::span<const Ray> rays, int t, std::uint64_t sample_seed,
                                const ColorGradFn& color_grad, double occ_upstream,
                                GradBuffer& grads) {
    Pipeline pipe(model, settings, t);
    RenderOutputs out;
    out.colors.assign(rays.size(), settings.background);
    out.opacities.assign(rays.size(), 0.0);
    if (rays.empty()) return out;

    int workers = worker_count(settings.threads);
    std::size_t n_blocks = (rays.size() + kRayBlockSize - 1) / kRayBlockSize;
    std::vector<double> block_occ(n_blocks, 0.0);
    std::vector<RayWorkspace> scratch(static_cast<size_t>(workers));
    std::vector<GradBuffer> block_grads(n_blocks);
    for (auto& g : block_grads) g.init_like(model);

    const double docc_per_sample = occ_upstream / static_cast<double>(rays.size());

    parallel_blocks(rays.size(), kRayBlockSize, workers,
                    [&](std::size_t block, std::size_t begin, std::size_t end, int slot) {
                        RayWorkspace& ws = scratch[static_cast<size_t>(slot)];
                        GradBuffer& g = block_grads[block];
                        double occ = 0.0;
                        for (std::size_t i = begin; i < end; ++i) {
                            RayForward f = pipe.forward(rays[i],
                                                        ray_stream_seed(sample_seed, i), ws);
                            out.colors[i] = f.color;
                            out.opacities[i] = f.opacity;
                            if (f.occ_count > 0) occ += f.occ_sum / f.occ_count;
                            Vec3 dcolor = color_grad(i, f.color);
                            pipe.backward(rays[i], f, dcolor, docc_per_sample, ws, g);
                        }
                        block_occ[block] = occ;
                    });

    // Merge in block order: reproducible for any worker count.
    for (auto& g : block_grads) grads.add(g);
    double occ_total = 0.0;
    for (double o : block_occ) occ_total += o;
    out.occlusion = occ_total / static_cast<double>(rays.size());
    return out;
}

}  // namespace fewt::render
