#pragma once

#include <span>
#include <vector>

#include "fewt/rng.hpp"

namespace fewt::decoder {

// Fixed-topology MLP: relu hidden layers, sigmoid output, output width 3.
// Parameters live in one contiguous array (per layer: row-major weights
// [out x in], then bias [out]) so optimizer moments and checkpoints can
// mirror the layout directly.
struct Decoder {
    std::vector<int> widths;          // [input, hidden..., 3]
    std::vector<double> params;
    std::vector<std::size_t> weight_offset;
    std::vector<std::size_t> bias_offset;

    Decoder() = default;
    Decoder(int input_dim, const std::vector<int>& hidden_widths);

    int input_dim() const { return widths.front(); }
    int layer_count() const { return static_cast<int>(widths.size()) - 1; }

    std::span<double> weight(int layer);
    std::span<const double> weight(int layer) const;
    std::span<double> bias(int layer);
    std::span<const double> bias(int layer) const;

    // He-style uniform weights, zero biases.
    void init_random(Rng& rng);

    // Post-activation values per layer for a batch of rows; the last layer
    // holds the rgb outputs.
    struct Workspace {
        std::vector<std::vector<double>> acts;
    };

    // Transposed weight copies ([in x out] per layer). The input-major
    // accumulation order is fixed, so results are deterministic, and the
    // inner loop runs over independent outputs, which vectorizes without
    // reordering any floating-point sum. Zero inputs (relu-gated hidden
    // units) are skipped outright.
    struct Plan {
        std::vector<std::vector<double>> transposed;
    };
    Plan make_plan() const;

    // inputs: batch_size x input_dim, row-major. Outputs land in
    // ws.acts.back() (batch_size x 3), components in (0,1). A Plan built
    // from the same parameters speeds up wide layers; pass nullptr to skip.
    void forward_batch(std::span<const double> inputs, int batch_size, Workspace& ws,
                       const Plan* plan = nullptr) const;

    // Accumulates parameter gradients into grad_params (size params.size())
    // and input gradients into grad_inputs (batch_size x input_dim).
    // ws must hold the forward activations for the same inputs.
    void backward_batch(std::span<const double> inputs, int batch_size, const Workspace& ws,
                        std::span<const double> upstream_rgb, std::span<double> grad_params,
                        std::span<double> grad_inputs) const;

    // Single-point convenience used by tests and tools.
    std::array<double, 3> decode(std::span<const double> encoded) const;
};

}  // namespace fewt::decoder
