#include "fewt/decoder.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fewt::decoder {

Decoder::Decoder(int input_dim, const std::vector<int>& hidden_widths) {
    if (input_dim < 1) throw std::invalid_argument("decoder input dim must be >= 1");
    widths.push_back(input_dim);
    for (int w : hidden_widths) {
        if (w < 1) throw std::invalid_argument("decoder hidden width must be >= 1");
        widths.push_back(w);
    }
    widths.push_back(3);

    std::size_t offset = 0;
    for (int l = 0; l < layer_count(); ++l) {
        int in = widths[static_cast<size_t>(l)];
        int out = widths[static_cast<size_t>(l) + 1];
        weight_offset.push_back(offset);
        offset += static_cast<std::size_t>(out) * in;
        bias_offset.push_back(offset);
        offset += static_cast<std::size_t>(out);
    }
    params.assign(offset, 0.0);
}

std::span<double> Decoder::weight(int layer) {
    std::size_t n = static_cast<std::size_t>(widths[static_cast<size_t>(layer) + 1]) *
                    widths[static_cast<size_t>(layer)];
    return {params.data() + weight_offset[static_cast<size_t>(layer)], n};
}

std::span<const double> Decoder::weight(int layer) const {
    return const_cast<Decoder*>(this)->weight(layer);
}

std::span<double> Decoder::bias(int layer) {
    return {params.data() + bias_offset[static_cast<size_t>(layer)],
            static_cast<std::size_t>(widths[static_cast<size_t>(layer) + 1])};
}

std::span<const double> Decoder::bias(int layer) const {
    return const_cast<Decoder*>(this)->bias(layer);
}

void Decoder::init_random(Rng& rng) {
    for (int l = 0; l < layer_count(); ++l) {
        double limit = std::sqrt(6.0 / widths[static_cast<size_t>(l)]);
        for (double& w : weight(l)) w = rng.uniform(-limit, limit);
        for (double& b : bias(l)) b = 0.0;
    }
}

namespace {

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

Decoder::Plan Decoder::make_plan() const {
    Plan plan;
    plan.transposed.resize(static_cast<size_t>(layer_count()));
    for (int l = 0; l < layer_count(); ++l) {
        int in_w = widths[static_cast<size_t>(l)];
        int out_w = widths[static_cast<size_t>(l) + 1];
        auto W = weight(l);
        auto& wt = plan.transposed[static_cast<size_t>(l)];
        wt.resize(static_cast<std::size_t>(in_w) * out_w);
        for (int o = 0; o < out_w; ++o)
            for (int i = 0; i < in_w; ++i)
                wt[static_cast<std::size_t>(i) * out_w + o] =
                    W[static_cast<std::size_t>(o) * in_w + i];
    }
    return plan;
}

void Decoder::forward_batch(std::span<const double> inputs, int batch_size, Workspace& ws,
                            const Plan* plan) const {
    if (inputs.size() != static_cast<std::size_t>(batch_size) * input_dim())
        throw std::invalid_argument("decoder forward: input size mismatch");

    ws.acts.resize(static_cast<size_t>(layer_count()));
    const double* cur = inputs.data();
    int cur_width = input_dim();
    for (int l = 0; l < layer_count(); ++l) {
        int out_w = widths[static_cast<size_t>(l) + 1];
        auto& act = ws.acts[static_cast<size_t>(l)];
        act.assign(static_cast<std::size_t>(batch_size) * out_w, 0.0);
        auto b = bias(l);
        const bool last = l == layer_count() - 1;
        const double* wt =
            plan ? plan->transposed[static_cast<size_t>(l)].data() : nullptr;
        auto W = weight(l);
        for (int s = 0; s < batch_size; ++s) {
            const double* row_in = cur + static_cast<std::size_t>(s) * cur_width;
            double* row_out = act.data() + static_cast<std::size_t>(s) * out_w;
            if (wt) {
                for (int o = 0; o < out_w; ++o) row_out[o] = b[static_cast<size_t>(o)];
                for (int i = 0; i < cur_width; ++i) {
                    double x = row_in[i];
                    if (x == 0.0) continue;
                    const double* wt_row = wt + static_cast<std::size_t>(i) * out_w;
                    for (int o = 0; o < out_w; ++o) row_out[o] += x * wt_row[o];
                }
                for (int o = 0; o < out_w; ++o) {
                    double z = row_out[o];
                    row_out[o] = last ? sigmoid(z) : (z > 0.0 ? z : 0.0);
                }
            } else {
                for (int o = 0; o < out_w; ++o) {
                    const double* w_row = W.data() + static_cast<std::size_t>(o) * cur_width;
                    double z = b[static_cast<size_t>(o)];
                    for (int i = 0; i < cur_width; ++i) z += w_row[i] * row_in[i];
                    row_out[o] = last ? sigmoid(z) : (z > 0.0 ? z : 0.0);
                }
            }
        }
        cur = act.data();
        cur_width = out_w;
    }
}

void Decoder::backward_batch(std::span<const double> inputs, int batch_size,
                             const Workspace& ws, std::span<const double> upstream_rgb,
                             std::span<double> grad_params,
                             std::span<double> grad_inputs) const {
    if (grad_params.size() != params.size())
        throw std::invalid_argument("decoder backward: grad_params size mismatch");
    if (upstream_rgb.size() != static_cast<std::size_t>(batch_size) * 3)
        throw std::invalid_argument("decoder backward: upstream size mismatch");
    if (grad_inputs.size() != static_cast<std::size_t>(batch_size) * input_dim())
        throw std::invalid_argument("decoder backward: grad_inputs size mismatch");

    // delta starts as d(loss)/d(pre-activation) of the output layer.
    std::vector<double> delta(upstream_rgb.begin(), upstream_rgb.end());
    {
        const auto& out = ws.acts.back();
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= out[i] * (1.0 - out[i]);
    }

    std::vector<double> next_delta;
    for (int l = layer_count() - 1; l >= 0; --l) {
        int in_w = widths[static_cast<size_t>(l)];
        int out_w = widths[static_cast<size_t>(l) + 1];
        const double* prev_act =
            l == 0 ? inputs.data() : ws.acts[static_cast<size_t>(l) - 1].data();
        auto W = weight(l);
        double* gW = grad_params.data() + weight_offset[static_cast<size_t>(l)];
        double* gb = grad_params.data() + bias_offset[static_cast<size_t>(l)];

        if (l > 0) next_delta.assign(static_cast<std::size_t>(batch_size) * in_w, 0.0);

        for (int s = 0; s < batch_size; ++s) {
            const double* d_row = delta.data() + static_cast<std::size_t>(s) * out_w;
            const double* a_row = prev_act + static_cast<std::size_t>(s) * in_w;
            double* nd_row = l > 0 ? next_delta.data() + static_cast<std::size_t>(s) * in_w
                                   : grad_inputs.data() + static_cast<std::size_t>(s) * in_w;
            for (int o = 0; o < out_w; ++o) {
                double d = d_row[o];
                if (d == 0.0) continue;
                gb[o] += d;
                double* gw_row = gW + static_cast<std::size_t>(o) * in_w;
                const double* w_row = W.data() + static_cast<std::size_t>(o) * in_w;
                for (int i = 0; i < in_w; ++i) {
                    gw_row[i] += d * a_row[i];
                    nd_row[i] += d * w_row[i];
                }
            }
        }
        if (l > 0) {
            // relu gate on the way down.
            const auto& act = ws.acts[static_cast<size_t>(l) - 1];
            for (std::size_t i = 0; i < next_delta.size(); ++i)
                if (act[i] <= 0.0) next_delta[i] = 0.0;
            delta.swap(next_delta);
        }
    }
}

std::array<double, 3> Decoder::decode(std::span<const double> encoded) const {
    Workspace ws;
    forward_batch(encoded, 1, ws);
    const auto& out = ws.acts.back();
    return {out[0], out[1], out[2]};
}

}  // namespace fewt::decoder
