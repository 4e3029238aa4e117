#include "fewt/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

#include "fewt/io.hpp"

namespace fewt::ckpt {

namespace {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_f32_array(std::string& out, const std::vector<double>& v) {
    for (double x : v) put_f32(out, static_cast<float>(x));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void f32_array(std::vector<double>& out, std::size_t n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(f32());
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

void put_grid(std::string& out, const grid::FactorGrid& g) {
    put_u32(out, g.factorization() == grid::Factorization::VM ? 0u : 1u);
    const auto& geom = g.geometry();
    for (int a = 0; a < 3; ++a) put_u32(out, static_cast<std::uint32_t>(geom.resolution[static_cast<size_t>(a)]));
    for (int a = 0; a < 3; ++a) put_f32(out, static_cast<float>(geom.aabb_min[a]));
    for (int a = 0; a < 3; ++a) put_f32(out, static_cast<float>(geom.aabb_max[a]));
    put_u32(out, static_cast<std::uint32_t>(g.rank()));
    put_f32_array(out, g.data());
}

grid::FactorGrid read_grid(Reader& r) {
    grid::Factorization f = r.u32() == 0 ? grid::Factorization::VM : grid::Factorization::CP;
    grid::GridGeometry geom;
    for (int a = 0; a < 3; ++a) geom.resolution[static_cast<size_t>(a)] = static_cast<int>(r.u32());
    for (int a = 0; a < 3; ++a) geom.aabb_min[a] = r.f32();
    for (int a = 0; a < 3; ++a) geom.aabb_max[a] = r.f32();
    int rank = static_cast<int>(r.u32());
    grid::FactorGrid g(geom, f, rank);
    r.f32_array(g.data(), g.data().size());
    return g;
}

void put_moments(std::string& out, const trainer::AdamMoments& m) {
    put_u64(out, m.step);
    put_f32_array(out, m.m);
    put_f32_array(out, m.v);
}

void read_moments(Reader& r, trainer::AdamMoments& m, std::size_t n) {
    m.step = r.u64();
    r.f32_array(m.m, n);
    r.f32_array(m.v, n);
}

}  // namespace

void save(const std::string& path, const trainer::TrainState& state,
          const std::string& config_json) {
    const Model& m = state.model;
    std::string out;
    out.reserve(64 + 4 * (m.density.factors.data().size() + m.appearance.factors.data().size() +
                          m.appearance.basis.size() + m.decoder.params.size()));
    out += "FEWT";
    put_u32(out, kVersion);
    put_u32(out, m.density.activation == grid::DensityActivation::Softplus ? 0u : 1u);
    put_u32(out, static_cast<std::uint32_t>(m.n_freq_features));
    put_u32(out, static_cast<std::uint32_t>(m.n_freq_dir));

    put_grid(out, m.density.factors);
    put_grid(out, m.appearance.factors);
    put_u32(out, static_cast<std::uint32_t>(m.appearance.feature_dim));
    put_f32_array(out, m.appearance.basis);

    put_u32(out, static_cast<std::uint32_t>(m.decoder.layer_count()));
    for (int l = 0; l < m.decoder.layer_count(); ++l) {
        put_u32(out, static_cast<std::uint32_t>(m.decoder.widths[static_cast<size_t>(l)]));
        put_u32(out, static_cast<std::uint32_t>(m.decoder.widths[static_cast<size_t>(l) + 1]));
        for (double w : m.decoder.weight(l)) put_f32(out, static_cast<float>(w));
        for (double b : m.decoder.bias(l)) put_f32(out, static_cast<float>(b));
    }

    put_u64(out, config_json.size());
    out += config_json;

    put_u8(out, 1);
    put_u64(out, static_cast<std::uint64_t>(state.iteration));
    put_moments(out, state.density);
    put_moments(out, state.appearance);
    put_moments(out, state.basis);
    put_moments(out, state.decoder);

    io::atomic_write(path, out);
}

Loaded load(const std::string& path) {
    std::string buf = io::read_file(path);
    Reader r{buf};
    if (r.bytes(4) != "FEWT") throw std::runtime_error(path + ": not a FEWT checkpoint");
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error(path + ": checkpoint version mismatch (expected " +
                                 std::to_string(kVersion) + ", got " + std::to_string(version) +
                                 ")");

    Loaded out;
    Model& m = out.state.model;
    m.density.activation =
        r.u32() == 0 ? grid::DensityActivation::Softplus : grid::DensityActivation::Relu;
    m.n_freq_features = static_cast<int>(r.u32());
    m.n_freq_dir = static_cast<int>(r.u32());

    m.density.factors = read_grid(r);
    m.appearance.factors = read_grid(r);
    int feature_dim = static_cast<int>(r.u32());
    m.appearance.feature_dim = feature_dim;
    r.f32_array(m.appearance.basis,
                static_cast<std::size_t>(m.appearance.factors.component_count()) * feature_dim);

    int n_layers = static_cast<int>(r.u32());
    if (n_layers < 1) throw std::runtime_error(path + ": invalid decoder layer count");
    std::vector<int> hidden;
    std::vector<std::pair<int, int>> dims;
    std::vector<std::vector<double>> layer_params;
    for (int l = 0; l < n_layers; ++l) {
        int in = static_cast<int>(r.u32());
        int out_w = static_cast<int>(r.u32());
        if (in < 1 || out_w < 1) throw std::runtime_error(path + ": invalid decoder layer shape");
        if (!dims.empty() && dims.back().second != in)
            throw std::runtime_error(path + ": decoder layer shape chain is inconsistent");
        dims.emplace_back(in, out_w);
        if (l < n_layers - 1) hidden.push_back(out_w);
        std::vector<double> p;
        r.f32_array(p, static_cast<std::size_t>(out_w) * in + out_w);
        layer_params.push_back(std::move(p));
    }
    if (dims.back().second != 3)
        throw std::runtime_error(path + ": decoder output width must be 3");
    m.decoder = decoder::Decoder(dims.front().first, hidden);
    for (int l = 0; l < n_layers; ++l) {
        const auto& p = layer_params[static_cast<size_t>(l)];
        auto W = m.decoder.weight(l);
        auto b = m.decoder.bias(l);
        std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(W.size()), W.begin());
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(W.size()), p.end(), b.begin());
    }

    std::uint64_t cfg_len = r.u64();
    out.config_json = r.bytes(cfg_len);

    if (r.u8() == 1) {
        out.state.iteration = static_cast<std::int64_t>(r.u64());
        read_moments(r, out.state.density, m.density.factors.data().size());
        read_moments(r, out.state.appearance, m.appearance.factors.data().size());
        read_moments(r, out.state.basis, m.appearance.basis.size());
        read_moments(r, out.state.decoder, m.decoder.params.size());
    } else {
        out.state.reset_moments();
    }
    return out;
}

}  // namespace fewt::ckpt
