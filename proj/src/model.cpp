#include "fewt/model.hpp"

#include <cmath>

namespace fewt {

Model Model::create(const ModelConfig& cfg, const MaskSet& masks, std::uint64_t seed) {
    grid::GridGeometry geom{cfg.resolution, cfg.aabb_min, cfg.aabb_max};
    geom.validate();

    Model m;
    m.density = grid::DensityGrid(geom, cfg.factorization, cfg.rank_density,
                                  cfg.density_activation);
    m.appearance = grid::AppearanceGrid(geom, cfg.factorization, cfg.rank_appearance,
                                        cfg.feature_dim);
    m.n_freq_features = cfg.n_freq_features;
    m.n_freq_dir = cfg.n_freq_dir;
    m.masks = masks;

    int input_dim = freq_mask::encoding_length(cfg.feature_dim, cfg.n_freq_features) +
                    freq_mask::encoding_length(3, cfg.n_freq_dir);
    m.decoder = decoder::Decoder(input_dim, cfg.decoder_hidden);

    Rng rng(seed);
    m.density.factors.init_random(rng, cfg.init_scale_density);
    m.appearance.init_random(rng, cfg.init_scale_appearance);
    m.decoder.init_random(rng);
    return m;
}

MaskValues Model::masks_at(int t) const {
    MaskValues v;
    if (!masks.enabled) return v;
    v.density = masks.density.at(t, density.factors.component_count());
    v.appearance = masks.appearance.at(t, appearance.feature_dim);
    v.encoding = masks.encoding.at(t, encoding_mask_length());
    return v;
}

void GradBuffer::init_like(const Model& m) {
    density.assign(m.density.factors.data().size(), 0.0);
    appearance.assign(m.appearance.factors.data().size(), 0.0);
    basis.assign(m.appearance.basis.size(), 0.0);
    decoder.assign(m.decoder.params.size(), 0.0);
}

void GradBuffer::zero() {
    std::fill(density.begin(), density.end(), 0.0);
    std::fill(appearance.begin(), appearance.end(), 0.0);
    std::fill(basis.begin(), basis.end(), 0.0);
    std::fill(decoder.begin(), decoder.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
    for (std::size_t i = 0; i < density.size(); ++i) density[i] += other.density[i];
    for (std::size_t i = 0; i < appearance.size(); ++i) appearance[i] += other.appearance[i];
    for (std::size_t i = 0; i < basis.size(); ++i) basis[i] += other.basis[i];
    for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i] += other.decoder[i];
}

bool GradBuffer::finite(std::string* group) const {
    auto check = [&](const std::vector<double>& v, const char* name) {
        for (double x : v) {
            if (!std::isfinite(x)) {
                if (group) *group = name;
                return false;
            }
        }
        return true;
    };
    return check(density, "density_grid") && check(appearance, "appearance_grid") &&
           check(basis, "appearance_basis") && check(decoder, "decoder");
}

}  // namespace fewt
