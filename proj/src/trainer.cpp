#include "fewt/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "fewt/checkpoint.hpp"
#include "fewt/io.hpp"
#include "fewt/renderer.hpp"

namespace fewt::trainer {

void TrainState::reset_moments() {
    density.reset(model.density.factors.data().size());
    appearance.reset(model.appearance.factors.data().size());
    basis.reset(model.appearance.basis.size());
    decoder.reset(model.decoder.params.size());
}

LossTerms total_loss(std::span<const Vec3> pred, std::span<const Vec3> gt, double occlusion,
                     std::span<const double> density_factors, double lambda_occ,
                     double lambda_l1) {
    if (pred.size() != gt.size()) throw std::invalid_argument("total_loss: shape mismatch");
    LossTerms out;
    if (!pred.empty()) {
        double sq = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            Vec3 d = pred[i] - gt[i];
            sq += dot(d, d);
        }
        out.mse = sq / (3.0 * static_cast<double>(pred.size()));
    }
    out.occ = occlusion;
    if (!density_factors.empty()) {
        double abs_sum = 0.0;
        for (double v : density_factors) abs_sum += std::abs(v);
        out.l1 = abs_sum / static_cast<double>(density_factors.size());
    }
    out.total = out.mse + lambda_occ * out.occ + lambda_l1 * out.l1;
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               double lr, double beta1, double beta2, double eps,
               const std::string& group_name) {
    if (params.size() != grads.size() || params.size() != moments.m.size())
        throw std::invalid_argument("adam_step: shape mismatch in group " + group_name);
    for (double g : grads) {
        if (!std::isfinite(g))
            throw std::runtime_error("non-finite gradient in parameter group '" + group_name +
                                     "'");
    }
    moments.step += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(moments.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(moments.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        moments.m[i] = beta1 * moments.m[i] + (1.0 - beta1) * g;
        moments.v[i] = beta2 * moments.v[i] + (1.0 - beta2) * g * g;
        double m_hat = moments.m[i] / bc1;
        double v_hat = moments.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

double lr_schedule(int t, int total_iterations, double initial_lr, bool decay_enabled,
                   double decay) {
    if (!decay_enabled || total_iterations <= 0) return initial_lr;
    double frac = static_cast<double>(t) / static_cast<double>(total_iterations);
    return initial_lr * std::pow(decay, frac);
}

std::string loss_log_csv(std::span<const LogRow> rows) {
    std::string out = "iter,mse,occ,l1,total,lr_grid,lr_mlp,seconds\n";
    char buf[256];
    for (const LogRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n",
                      static_cast<long long>(r.iter), r.loss.mse, r.loss.occ, r.loss.l1,
                      r.loss.total, r.lr_grid, r.lr_mlp, r.seconds);
        out += buf;
    }
    return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return render::ray_stream_seed(seed, salt ^ 0xa5a5a5a5a5a5a5a5ull);
}

void save_checkpoint(const TrainState& state, const TrainSession& session,
                     const std::string& name) {
    if (session.out_dir.empty()) return;
    std::filesystem::create_directories(session.out_dir);
    ckpt::save((std::filesystem::path(session.out_dir) / name).string(), state,
               session.run_config_json);
}

}  // namespace

TrainResult train(TrainState& state, const TrainSession& session,
                  const std::vector<dataset::PosedImage>& views) {
    if (views.empty()) throw std::invalid_argument("train: dataset is empty");
    const TrainConfig& cfg = session.config;
    if (cfg.iterations < 1 || cfg.ray_batch_size < 1)
        throw std::invalid_argument("train: iterations and batch size must be >= 1");

    TrainResult result;
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    const std::size_t batch = static_cast<std::size_t>(cfg.ray_batch_size);
    std::vector<render::Ray> rays(batch);
    std::vector<Vec3> gts(batch);
    GradBuffer grads;

    auto upsample_due = [&](std::int64_t t) -> const std::array<int, 3>* {
        for (const auto& [iter, res] : cfg.upsample_schedule)
            if (iter == t) return &res;
        return nullptr;
    };

    for (std::int64_t t = state.iteration; t < cfg.iterations; ++t) {
        if (const auto* res = upsample_due(t)) {
            state.model.density.factors = state.model.density.factors.upsampled(*res);
            state.model.appearance.factors = state.model.appearance.factors.upsampled(*res);
            state.reset_moments();  // moment shapes changed
        }

        // Batches depend only on (seed, t): a resumed run draws the same rays.
        Rng batch_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        for (std::size_t i = 0; i < batch; ++i) {
            const auto& view = views[batch_rng.uniform_index(views.size())];
            int u = static_cast<int>(batch_rng.uniform_index(
                static_cast<std::uint64_t>(view.camera.width)));
            int v = static_cast<int>(batch_rng.uniform_index(
                static_cast<std::uint64_t>(view.camera.height)));
            rays[i] = dataset::generate_ray(view.camera, u, v, session.render.near,
                                            session.render.far);
            gts[i] = {view.image.at(u, v, 0), view.image.at(u, v, 1), view.image.at(u, v, 2)};
        }

        grads.init_like(state.model);
        const double color_scale = 2.0 / (3.0 * static_cast<double>(batch));
        auto color_grad = [&](std::size_t i, const Vec3& pred) {
            return (pred - gts[i]) * color_scale;
        };
        std::uint64_t sample_seed = mix_seed(cfg.seed ^ 0x5bd1e995u, static_cast<std::uint64_t>(t));
        render::RenderOutputs outputs =
            render::render_batch_grad(state.model, session.render, rays, static_cast<int>(t),
                                      sample_seed, color_grad, cfg.lambda_occ, grads);

        // L1 on the density factors.
        const auto& dd = state.model.density.factors.data();
        if (cfg.lambda_l1 > 0.0 && !dd.empty()) {
            double w = cfg.lambda_l1 / static_cast<double>(dd.size());
            for (std::size_t i = 0; i < dd.size(); ++i) {
                if (dd[i] > 0.0)
                    grads.density[i] += w;
                else if (dd[i] < 0.0)
                    grads.density[i] -= w;
            }
        }

        LossTerms loss = total_loss(outputs.colors, gts, outputs.occlusion, dd, cfg.lambda_occ,
                                    cfg.lambda_l1);
        if (!std::isfinite(loss.total)) {
            if (!session.out_dir.empty())
                io::atomic_write(
                    (std::filesystem::path(session.out_dir) / "loss.csv").string(),
                    loss_log_csv(result.log));
            throw std::runtime_error("non-finite loss at iteration " + std::to_string(t) +
                                     "; last checkpoint retained");
        }

        double lrg = lr_schedule(static_cast<int>(t), cfg.iterations, cfg.lr_grid,
                                 cfg.lr_decay_enabled, cfg.lr_decay);
        double lrm = lr_schedule(static_cast<int>(t), cfg.iterations, cfg.lr_mlp,
                                 cfg.lr_decay_enabled, cfg.lr_decay);
        adam_step(state.model.density.factors.data(), grads.density, state.density, lrg,
                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, "density_grid");
        adam_step(state.model.appearance.factors.data(), grads.appearance, state.appearance, lrg,
                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, "appearance_grid");
        adam_step(state.model.appearance.basis, grads.basis, state.basis, lrg, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps, "appearance_basis");
        adam_step(state.model.decoder.params, grads.decoder, state.decoder, lrm, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps, "decoder");

        state.iteration = t + 1;
        result.log.push_back({t + 1, loss, lrg, lrm, elapsed()});

        if (cfg.checkpoint_interval > 0 && (t + 1) % cfg.checkpoint_interval == 0 &&
            t + 1 < cfg.iterations) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_%06lld.fewt", static_cast<long long>(t + 1));
            save_checkpoint(state, session, name);
        }
    }

    save_checkpoint(state, session, "ckpt_final.fewt");
    result.seconds = elapsed();
    return result;
}

}  // namespace fewt::trainer
