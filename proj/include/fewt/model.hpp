#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fewt/decoder.hpp"
#include "fewt/freq_mask.hpp"
#include "fewt/grid.hpp"

namespace fewt {

struct ModelConfig {
    grid::Factorization factorization = grid::Factorization::VM;
    std::array<int, 3> resolution{48, 48, 48};
    Vec3 aabb_min{-1.5, -1.5, -1.5};
    Vec3 aabb_max{1.5, 1.5, 1.5};
    int rank_density = 4;
    int rank_appearance = 12;
    int feature_dim = 12;
    grid::DensityActivation density_activation = grid::DensityActivation::Softplus;
    double init_scale_density = 0.1;
    double init_scale_appearance = 0.1;
    std::vector<int> decoder_hidden{128, 128};
    int n_freq_features = 2;
    int n_freq_dir = 2;
};

// Three independent mask streams: density tensor components, appearance
// feature channels, and the positional encoding of (features, direction).
struct MaskSet {
    bool enabled = true;
    freq_mask::MaskSchedule density;
    freq_mask::MaskSchedule appearance;
    freq_mask::MaskSchedule encoding;
};

// Mask vectors for one iteration. Empty vectors mean the mask-free code path.
struct MaskValues {
    freq_mask::MaskVector density;
    freq_mask::MaskVector appearance;
    freq_mask::MaskVector encoding;
};

struct Model {
    grid::DensityGrid density;
    grid::AppearanceGrid appearance;
    decoder::Decoder decoder;
    MaskSet masks;
    int n_freq_features = 2;
    int n_freq_dir = 2;

    static Model create(const ModelConfig& cfg, const MaskSet& masks, std::uint64_t seed);

    int decoder_input_dim() const {
        int p = appearance.feature_dim;
        return freq_mask::encoding_length(p, n_freq_features) +
               freq_mask::encoding_length(3, n_freq_dir);
    }
    // Length of the (features, direction) encoding mask: the two encoded
    // blocks, raw copies excluded.
    int encoding_mask_length() const {
        return 2 * n_freq_features * appearance.feature_dim + 2 * n_freq_dir * 3;
    }

    MaskValues masks_at(int t) const;
};

// Gradients mirroring every learnable array of a Model.
struct GradBuffer {
    std::vector<double> density;
    std::vector<double> appearance;
    std::vector<double> basis;
    std::vector<double> decoder;

    void init_like(const Model& m);
    void zero();
    void add(const GradBuffer& other);
    // Returns false and names the offending group when any entry is non-finite.
    bool finite(std::string* group) const;
};

}  // namespace fewt
