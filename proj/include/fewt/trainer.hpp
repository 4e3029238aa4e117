#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fewt/dataset.hpp"
#include "fewt/model.hpp"
#include "fewt/renderer.hpp"

namespace fewt::trainer {

struct TrainConfig {
    int iterations = 15000;
    int ray_batch_size = 1024;
    double lr_grid = 0.02;
    double lr_mlp = 1e-3;
    bool lr_decay_enabled = true;
    double lr_decay = 0.1;  // lr(total) = lr(0) * lr_decay
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double lambda_occ = 0.01;
    double lambda_l1 = 1e-4;
    int checkpoint_interval = 0;  // iterations between snapshots; 0 = final only
    std::vector<std::pair<int, std::array<int, 3>>> upsample_schedule;
    std::uint64_t seed = 0;
};

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

struct TrainState {
    Model model;
    AdamMoments density;
    AdamMoments appearance;
    AdamMoments basis;
    AdamMoments decoder;
    std::int64_t iteration = 0;

    void reset_moments();
};

struct LossTerms {
    double mse = 0.0;
    double occ = 0.0;
    double l1 = 0.0;
    double total = 0.0;
};

// L = mean squared color error + lambda_occ * occlusion
//     + lambda_l1 * mean |density factor entry|.
LossTerms total_loss(std::span<const Vec3> pred, std::span<const Vec3> gt, double occlusion,
                     std::span<const double> density_factors, double lambda_occ,
                     double lambda_l1);

// Standard Adam with bias correction. Throws (naming group_name) on any
// non-finite gradient entry. moments.step is advanced here.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               double lr, double beta1, double beta2, double eps,
               const std::string& group_name);

// Exponential decay from the initial rate to initial*decay at t = total.
double lr_schedule(int t, int total_iterations, double initial_lr, bool decay_enabled,
                   double decay);

struct LogRow {
    std::int64_t iter = 0;
    LossTerms loss;
    double lr_grid = 0.0;
    double lr_mlp = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<LogRow> log;
    double seconds = 0.0;
};

struct TrainSession {
    TrainConfig config;
    render::RenderSettings render;
    // When non-empty, checkpoints land here (ckpt_final.fewt and interval
    // snapshots) with the given config JSON embedded.
    std::string out_dir;
    std::string run_config_json;
};

// Runs iterations state.iteration .. config.iterations-1. Ray batches are
// drawn per-iteration from a seed mixed with t, so a resumed run samples the
// same batches the uninterrupted run would. Aborts (keeping the last written
// checkpoint) on a non-finite loss or gradient.
TrainResult train(TrainState& state, const TrainSession& session,
                  const std::vector<dataset::PosedImage>& views);

// CSV with header iter,mse,occ,l1,total,lr_grid,lr_mlp,seconds.
std::string loss_log_csv(std::span<const LogRow> rows);

}  // namespace fewt::trainer
