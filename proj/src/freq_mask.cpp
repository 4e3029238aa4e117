#include "fewt/freq_mask.hpp"

#include <cmath>
#include <stdexcept>

namespace fewt::freq_mask {

MaskVector dynamic_mask(int t, int total_reg_iters, int length) {
    if (length < 1) throw std::invalid_argument("dynamic_mask: length must be >= 1");
    if (total_reg_iters < 1) throw std::invalid_argument("dynamic_mask: T must be >= 1");
    if (t < 0) throw std::invalid_argument("dynamic_mask: t must be >= 0");

    MaskVector mask(static_cast<size_t>(length), 0.0);
    if (t >= total_reg_iters) {
        for (double& v : mask) v = 1.0;
        return mask;
    }
    double ptr = static_cast<double>(t) * length / total_reg_iters + 3.0;
    if (ptr > length) ptr = static_cast<double>(length);
    int whole = static_cast<int>(std::floor(ptr));
    for (int i = 0; i < whole && i < length; ++i) mask[static_cast<size_t>(i)] = 1.0;
    if (whole < length) mask[static_cast<size_t>(whole)] = ptr - whole;
    return mask;
}

MaskVector fixed_ratio_mask(int length, double v_ratio) {
    if (length < 1) throw std::invalid_argument("fixed_ratio_mask: length must be >= 1");
    if (v_ratio < 0.0 || v_ratio > 1.0)
        throw std::invalid_argument("fixed_ratio_mask: v_ratio must be in [0,1]");
    MaskVector mask(static_cast<size_t>(length), 0.0);
    int visible = static_cast<int>(std::floor(length * v_ratio));
    for (int i = 0; i < visible && i < length; ++i) mask[static_cast<size_t>(i)] = 1.0;
    return mask;
}

MaskVector MaskSchedule::at(int t, int length) const {
    return mode == MaskMode::Dynamic ? dynamic_mask(t, total_reg_iters, length)
                                     : fixed_ratio_mask(length, v_ratio);
}

std::vector<double> apply_mask(std::span<const double> values, const MaskVector& mask) {
    if (values.size() != mask.size())
        throw std::invalid_argument("apply_mask: value/mask length mismatch");
    std::vector<double> out(values.size());
    for (size_t i = 0; i < values.size(); ++i) out[i] = values[i] * mask[i];
    return out;
}

void apply_mask_inplace(std::span<double> values, const MaskVector& mask) {
    if (values.size() != mask.size())
        throw std::invalid_argument("apply_mask: value/mask length mismatch");
    for (size_t i = 0; i < values.size(); ++i) values[i] *= mask[i];
}

void positional_encoding(std::span<const double> input, int n_freq, std::span<const double> mask,
                         std::span<double> out) {
    const size_t dim = input.size();
    const size_t enc_len = 2 * static_cast<size_t>(n_freq) * dim;
    if (!mask.empty() && mask.size() != enc_len)
        throw std::invalid_argument("positional_encoding: mask length mismatch");
    if (out.size() != dim + enc_len)
        throw std::invalid_argument("positional_encoding: output length mismatch");

    for (size_t d = 0; d < dim; ++d) out[d] = input[d];
    size_t k = dim;
    double freq = 1.0;
    for (int j = 0; j < n_freq; ++j) {
        for (size_t d = 0; d < dim; ++d) out[k + d] = std::sin(freq * input[d]);
        for (size_t d = 0; d < dim; ++d) out[k + dim + d] = std::cos(freq * input[d]);
        k += 2 * dim;
        freq *= 2.0;
    }
    if (!mask.empty()) {
        for (size_t i = 0; i < enc_len; ++i) out[dim + i] *= mask[i];
    }
}

void positional_encoding_backward(std::span<const double> input, int n_freq,
                                  std::span<const double> mask, std::span<const double> upstream,
                                  std::span<double> grad_input) {
    const size_t dim = input.size();
    const size_t enc_len = 2 * static_cast<size_t>(n_freq) * dim;
    if (upstream.size() != dim + enc_len)
        throw std::invalid_argument("positional_encoding_backward: upstream length mismatch");
    if (grad_input.size() != dim)
        throw std::invalid_argument("positional_encoding_backward: grad length mismatch");

    for (size_t d = 0; d < dim; ++d) grad_input[d] += upstream[d];
    size_t k = dim;
    double freq = 1.0;
    for (int j = 0; j < n_freq; ++j) {
        for (size_t d = 0; d < dim; ++d) {
            double m_sin = mask.empty() ? 1.0 : mask[k - dim + d];
            double m_cos = mask.empty() ? 1.0 : mask[k - dim + dim + d];
            double a = freq * input[d];
            grad_input[d] += upstream[k + d] * m_sin * freq * std::cos(a);
            grad_input[d] -= upstream[k + dim + d] * m_cos * freq * std::sin(a);
        }
        k += 2 * dim;
        freq *= 2.0;
    }
}

}  // namespace fewt::freq_mask
