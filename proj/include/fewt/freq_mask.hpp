#pragma once

#include <span>
#include <vector>

namespace fewt::freq_mask {

// Per-index multipliers in [0,1], monotone non-increasing along the index.
using MaskVector = std::vector<double>;

enum class MaskMode { Dynamic, FixedRatio };

// One mask stream. T == total iterations the schedule ramps over; after that
// the dynamic mask is all-ones. v_ratio only applies to FixedRatio.
// total_reg_iters 0 means "unresolved": config loading replaces it with 90%
// of the training run, and using it unresolved throws.
struct MaskSchedule {
    MaskMode mode = MaskMode::Dynamic;
    int total_reg_iters = 0;
    double v_ratio = 1.0;

    MaskVector at(int t, int length) const;
};

// Dynamic schedule: visible band grows linearly with t, with a single
// fractional transition entry. ptr = min(t*L/T + 3, L); 1-based indices
// i <= floor(ptr) are 1, index floor(ptr)+1 holds frac(ptr), the rest 0.
// t >= T returns all-ones.
MaskVector dynamic_mask(int t, int total_reg_iters, int length);

// First floor(L * v_ratio) entries are 1, remainder 0.
MaskVector fixed_ratio_mask(int length, double v_ratio);

// Elementwise product. Lengths must match.
std::vector<double> apply_mask(std::span<const double> values, const MaskVector& mask);

// In-place variant used on hot paths.
void apply_mask_inplace(std::span<double> values, const MaskVector& mask);

// Sin/cos encoding at frequencies 2^0 .. 2^{n_freq-1}, laid out frequency-major:
// for each frequency, sin of every input dim then cos of every input dim.
// The raw input is copied unmasked ahead of the encoded block; the mask (when
// non-empty) covers only the 2*n_freq*dim encoded entries.
// Output length: dim + 2*n_freq*dim.
void positional_encoding(std::span<const double> input, int n_freq, std::span<const double> mask,
                         std::span<double> out);

// Backward companion: accumulates d(out)/d(input) * upstream into grad_input.
void positional_encoding_backward(std::span<const double> input, int n_freq,
                                  std::span<const double> mask, std::span<const double> upstream,
                                  std::span<double> grad_input);

inline int encoding_length(int dim, int n_freq) { return dim + 2 * n_freq * dim; }

}  // namespace fewt::freq_mask
