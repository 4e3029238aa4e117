#include "fewt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fewt::grid {

void GridGeometry::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (resolution[static_cast<size_t>(a)] < 2)
            throw std::invalid_argument("grid resolution must be >= 2 per axis");
        if (!(aabb_min[a] < aabb_max[a]))
            throw std::invalid_argument("aabb_min must be < aabb_max componentwise");
    }
}

double GridGeometry::node_coord(int axis, int index) const {
    int n = resolution[static_cast<size_t>(axis)];
    return aabb_min[axis] + (aabb_max[axis] - aabb_min[axis]) * index / (n - 1);
}

AxisStencil axis_stencil(const GridGeometry& g, int axis, double coord) {
    int n = g.resolution[static_cast<size_t>(axis)];
    double u = (coord - g.aabb_min[axis]) / (g.aabb_max[axis] - g.aabb_min[axis]) * (n - 1);
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::clamp(i0, 0, n - 2);
    return {i0, u - i0};
}

std::array<int, 2> FactorGrid::plane_axes(int mode) {
    switch (mode) {
        case 0: return {1, 2};
        case 1: return {0, 2};
        default: return {0, 1};
    }
}

FactorGrid::FactorGrid(GridGeometry geometry, Factorization factorization, int rank)
    : geometry_(geometry), factorization_(factorization), rank_(rank) {
    geometry_.validate();
    if (rank_ < 1) throw std::invalid_argument("factor rank must be >= 1");

    std::size_t offset = 0;
    for (int m = 0; m < 3; ++m) {
        line_base_[static_cast<size_t>(m)] = offset;
        offset += static_cast<std::size_t>(rank_) * geometry_.resolution[static_cast<size_t>(m)];
    }
    if (factorization_ == Factorization::VM) {
        for (int m = 0; m < 3; ++m) {
            plane_base_[static_cast<size_t>(m)] = offset;
            auto [a, b] = plane_axes(m);
            offset += static_cast<std::size_t>(rank_) *
                      geometry_.resolution[static_cast<size_t>(a)] *
                      geometry_.resolution[static_cast<size_t>(b)];
        }
    }
    data_.assign(offset, 0.0);
}

std::span<double> FactorGrid::line(int mode, int r) {
    std::size_t n = geometry_.resolution[static_cast<size_t>(mode)];
    return {data_.data() + line_base_[static_cast<size_t>(mode)] + static_cast<std::size_t>(r) * n,
            n};
}

std::span<const double> FactorGrid::line(int mode, int r) const {
    std::size_t n = geometry_.resolution[static_cast<size_t>(mode)];
    return {data_.data() + line_base_[static_cast<size_t>(mode)] + static_cast<std::size_t>(r) * n,
            n};
}

std::span<double> FactorGrid::plane(int mode, int r) {
    if (factorization_ != Factorization::VM)
        throw std::logic_error("CP factorization has no plane factors");
    auto [a, b] = plane_axes(mode);
    std::size_t n = static_cast<std::size_t>(geometry_.resolution[static_cast<size_t>(a)]) *
                    geometry_.resolution[static_cast<size_t>(b)];
    return {data_.data() + plane_base_[static_cast<size_t>(mode)] + static_cast<std::size_t>(r) * n,
            n};
}

std::span<const double> FactorGrid::plane(int mode, int r) const {
    return const_cast<FactorGrid*>(this)->plane(mode, r);
}

void FactorGrid::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void FactorGrid::init_random(Rng& rng, double scale) {
    for (double& v : data_) v = scale * rng.normal();
}

namespace {

inline double interp_line(std::span<const double> v, const AxisStencil& s) {
    return (1.0 - s.frac) * v[static_cast<size_t>(s.i0)] + s.frac * v[static_cast<size_t>(s.i0) + 1];
}

inline double interp_plane(std::span<const double> p, int nb, const AxisStencil& sa,
                           const AxisStencil& sb) {
    const double* row0 = p.data() + static_cast<std::size_t>(sa.i0) * nb + sb.i0;
    const double* row1 = row0 + nb;
    double v0 = (1.0 - sb.frac) * row0[0] + sb.frac * row0[1];
    double v1 = (1.0 - sb.frac) * row1[0] + sb.frac * row1[1];
    return (1.0 - sa.frac) * v0 + sa.frac * v1;
}

}  // namespace

void FactorGrid::eval_components(const Vec3& x, std::span<double> out) const {
    if (out.size() != static_cast<size_t>(component_count()))
        throw std::invalid_argument("eval_components: output size mismatch");

    std::array<AxisStencil, 3> st{axis_stencil(geometry_, 0, x.x), axis_stencil(geometry_, 1, x.y),
                                  axis_stencil(geometry_, 2, x.z)};

    if (factorization_ == Factorization::VM) {
        for (int m = 0; m < 3; ++m) {
            auto [a, b] = plane_axes(m);
            int nb = geometry_.resolution[static_cast<size_t>(b)];
            for (int r = 0; r < rank_; ++r) {
                double lv = interp_line(line(m, r), st[static_cast<size_t>(m)]);
                double pv = interp_plane(plane(m, r), nb, st[static_cast<size_t>(a)],
                                         st[static_cast<size_t>(b)]);
                out[static_cast<size_t>(3 * r + m)] = lv * pv;
            }
        }
    } else {
        for (int r = 0; r < rank_; ++r) {
            double v = 1.0;
            for (int m = 0; m < 3; ++m) v *= interp_line(line(m, r), st[static_cast<size_t>(m)]);
            out[static_cast<size_t>(r)] = v;
        }
    }
}

void FactorGrid::grad_components(const Vec3& x, std::span<const double> upstream,
                                 std::span<double> grad) const {
    if (upstream.size() != static_cast<size_t>(component_count()))
        throw std::invalid_argument("grad_components: upstream size mismatch");
    if (grad.size() != data_.size())
        throw std::invalid_argument("grad_components: gradient buffer size mismatch");

    std::array<AxisStencil, 3> st{axis_stencil(geometry_, 0, x.x), axis_stencil(geometry_, 1, x.y),
                                  axis_stencil(geometry_, 2, x.z)};

    if (factorization_ == Factorization::VM) {
        for (int m = 0; m < 3; ++m) {
            auto [a, b] = plane_axes(m);
            int nb = geometry_.resolution[static_cast<size_t>(b)];
            const AxisStencil& sm = st[static_cast<size_t>(m)];
            const AxisStencil& sa = st[static_cast<size_t>(a)];
            const AxisStencil& sb = st[static_cast<size_t>(b)];
            for (int r = 0; r < rank_; ++r) {
                double up = upstream[static_cast<size_t>(3 * r + m)];
                if (up == 0.0) continue;
                auto lv_span = line(m, r);
                double lv = interp_line(lv_span, sm);
                double pv = interp_plane(plane(m, r), nb, sa, sb);

                std::size_t line_off = line_base_[static_cast<size_t>(m)] +
                                       static_cast<std::size_t>(r) * lv_span.size();
                grad[line_off + static_cast<size_t>(sm.i0)] += up * pv * (1.0 - sm.frac);
                grad[line_off + static_cast<size_t>(sm.i0) + 1] += up * pv * sm.frac;

                std::size_t plane_off =
                    plane_base_[static_cast<size_t>(m)] +
                    static_cast<std::size_t>(r) *
                        static_cast<std::size_t>(geometry_.resolution[static_cast<size_t>(a)]) *
                        nb;
                std::size_t p00 = plane_off + static_cast<std::size_t>(sa.i0) * nb + sb.i0;
                double ulv = up * lv;
                grad[p00] += ulv * (1.0 - sa.frac) * (1.0 - sb.frac);
                grad[p00 + 1] += ulv * (1.0 - sa.frac) * sb.frac;
                grad[p00 + static_cast<size_t>(nb)] += ulv * sa.frac * (1.0 - sb.frac);
                grad[p00 + static_cast<size_t>(nb) + 1] += ulv * sa.frac * sb.frac;
            }
        }
    } else {
        for (int r = 0; r < rank_; ++r) {
            double up = upstream[static_cast<size_t>(r)];
            if (up == 0.0) continue;
            std::array<double, 3> lv;
            for (int m = 0; m < 3; ++m)
                lv[static_cast<size_t>(m)] = interp_line(line(m, r), st[static_cast<size_t>(m)]);
            for (int m = 0; m < 3; ++m) {
                double others = up;
                for (int o = 0; o < 3; ++o)
                    if (o != m) others *= lv[static_cast<size_t>(o)];
                const AxisStencil& s = st[static_cast<size_t>(m)];
                std::size_t n = geometry_.resolution[static_cast<size_t>(m)];
                std::size_t off =
                    line_base_[static_cast<size_t>(m)] + static_cast<std::size_t>(r) * n;
                grad[off + static_cast<size_t>(s.i0)] += others * (1.0 - s.frac);
                grad[off + static_cast<size_t>(s.i0) + 1] += others * s.frac;
            }
        }
    }
}

double FactorGrid::component_at_node(int comp, int ix, int iy, int iz) const {
    std::array<int, 3> idx{ix, iy, iz};
    if (factorization_ == Factorization::VM) {
        int r = comp / 3;
        int m = comp % 3;
        auto [a, b] = plane_axes(m);
        int nb = geometry_.resolution[static_cast<size_t>(b)];
        double lv = line(m, r)[static_cast<size_t>(idx[static_cast<size_t>(m)])];
        double pv = plane(m, r)[static_cast<std::size_t>(idx[static_cast<size_t>(a)]) * nb +
                                idx[static_cast<size_t>(b)]];
        return lv * pv;
    }
    double v = 1.0;
    for (int m = 0; m < 3; ++m)
        v *= line(m, comp)[static_cast<size_t>(idx[static_cast<size_t>(m)])];
    return v;
}

namespace {

// Linear resampling preserving endpoints (cell-vertex convention).
std::vector<double> resample_line(std::span<const double> src, int new_n) {
    std::vector<double> out(static_cast<size_t>(new_n));
    int old_n = static_cast<int>(src.size());
    for (int j = 0; j < new_n; ++j) {
        double u = new_n == 1 ? 0.0
                              : static_cast<double>(j) * (old_n - 1) / (new_n - 1);
        int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, old_n - 2);
        double f = u - i0;
        out[static_cast<size_t>(j)] =
            (1.0 - f) * src[static_cast<size_t>(i0)] + f * src[static_cast<size_t>(i0) + 1];
    }
    return out;
}

}  // namespace

FactorGrid FactorGrid::upsampled(const std::array<int, 3>& new_resolution) const {
    for (int a = 0; a < 3; ++a) {
        if (new_resolution[static_cast<size_t>(a)] < geometry_.resolution[static_cast<size_t>(a)])
            throw std::invalid_argument("upsample: resolution must not shrink");
    }
    GridGeometry new_geom = geometry_;
    new_geom.resolution = new_resolution;
    FactorGrid out(new_geom, factorization_, rank_);

    for (int m = 0; m < 3; ++m) {
        for (int r = 0; r < rank_; ++r) {
            auto resampled = resample_line(line(m, r), new_resolution[static_cast<size_t>(m)]);
            std::copy(resampled.begin(), resampled.end(), out.line(m, r).begin());
        }
    }
    if (factorization_ == Factorization::VM) {
        for (int m = 0; m < 3; ++m) {
            auto [a, b] = plane_axes(m);
            int old_na = geometry_.resolution[static_cast<size_t>(a)];
            int old_nb = geometry_.resolution[static_cast<size_t>(b)];
            int new_na = new_resolution[static_cast<size_t>(a)];
            int new_nb = new_resolution[static_cast<size_t>(b)];
            for (int r = 0; r < rank_; ++r) {
                auto src = plane(m, r);
                auto dst = out.plane(m, r);
                // Rows along b first, then columns along a.
                std::vector<double> tmp(static_cast<size_t>(old_na) * new_nb);
                for (int ia = 0; ia < old_na; ++ia) {
                    auto row = resample_line(src.subspan(static_cast<std::size_t>(ia) * old_nb,
                                                         static_cast<std::size_t>(old_nb)),
                                             new_nb);
                    std::copy(row.begin(), row.end(),
                              tmp.begin() + static_cast<std::size_t>(ia) * new_nb);
                }
                std::vector<double> col(static_cast<size_t>(old_na));
                for (int ib = 0; ib < new_nb; ++ib) {
                    for (int ia = 0; ia < old_na; ++ia)
                        col[static_cast<size_t>(ia)] =
                            tmp[static_cast<std::size_t>(ia) * new_nb + ib];
                    auto resampled = resample_line(col, new_na);
                    for (int ia = 0; ia < new_na; ++ia)
                        dst[static_cast<std::size_t>(ia) * new_nb + ib] =
                            resampled[static_cast<size_t>(ia)];
                }
            }
        }
    }
    return out;
}

double activate_density(double raw, DensityActivation act) {
    if (act == DensityActivation::Relu) return raw > 0.0 ? raw : 0.0;
    // softplus, overflow-safe
    return raw > 0.0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
}

double activate_density_grad(double raw, DensityActivation act) {
    if (act == DensityActivation::Relu) return raw > 0.0 ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-raw));
}

double DensityGrid::eval_raw(const Vec3& x) const {
    if (!factors.geometry().aabb().contains(x)) return 0.0;
    std::vector<double> comps(static_cast<size_t>(factors.component_count()));
    factors.eval_components(x, comps);
    double sum = 0.0;
    for (double c : comps) sum += c;
    return sum;
}

AppearanceGrid::AppearanceGrid(GridGeometry geometry, Factorization f, int rank, int feature_dim)
    : factors(geometry, f, rank), feature_dim(feature_dim) {
    if (feature_dim < 3) throw std::invalid_argument("appearance feature dim must be >= 3");
    basis.assign(static_cast<std::size_t>(factors.component_count()) * feature_dim, 0.0);
}

std::span<double> AppearanceGrid::basis_vector(int comp) {
    return {basis.data() + static_cast<std::size_t>(comp) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
}

std::span<const double> AppearanceGrid::basis_vector(int comp) const {
    return {basis.data() + static_cast<std::size_t>(comp) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
}

void AppearanceGrid::init_random(Rng& rng, double factor_scale) {
    factors.init_random(rng, factor_scale);
    // Random unit vectors; nearly orthogonal at the feature dims used here.
    for (int c = 0; c < factors.component_count(); ++c) {
        auto b = basis_vector(c);
        double norm_sq = 0.0;
        for (double& v : b) {
            v = rng.normal();
            norm_sq += v * v;
        }
        double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
        for (double& v : b) v *= inv;
    }
}

void AppearanceGrid::eval(const Vec3& x, std::span<double> out) const {
    if (out.size() != static_cast<size_t>(feature_dim))
        throw std::invalid_argument("AppearanceGrid::eval: output size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    if (!factors.geometry().aabb().contains(x)) return;
    std::vector<double> comps(static_cast<size_t>(factors.component_count()));
    factors.eval_components(x, comps);
    for (int c = 0; c < factors.component_count(); ++c) {
        auto b = basis_vector(c);
        double w = comps[static_cast<size_t>(c)];
        for (int p = 0; p < feature_dim; ++p) out[static_cast<size_t>(p)] += w * b[static_cast<size_t>(p)];
    }
}

std::vector<double> dense_reconstruct(const FactorGrid& g, std::size_t voxel_cap) {
    const auto& res = g.geometry().resolution;
    std::size_t total = static_cast<std::size_t>(res[0]) * res[1] * res[2];
    if (total > voxel_cap)
        throw std::runtime_error("dense_reconstruct: voxel count " + std::to_string(total) +
                                 " exceeds cap " + std::to_string(voxel_cap));
    std::vector<double> out(total, 0.0);
    for (int ix = 0; ix < res[0]; ++ix)
        for (int iy = 0; iy < res[1]; ++iy)
            for (int iz = 0; iz < res[2]; ++iz) {
                double sum = 0.0;
                for (int c = 0; c < g.component_count(); ++c)
                    sum += g.component_at_node(c, ix, iy, iz);
                out[(static_cast<std::size_t>(ix) * res[1] + iy) * res[2] + iz] = sum;
            }
    return out;
}

std::vector<std::vector<double>> dense_reconstruct(const AppearanceGrid& g,
                                                   std::size_t voxel_cap) {
    const auto& res = g.factors.geometry().resolution;
    std::size_t total = static_cast<std::size_t>(res[0]) * res[1] * res[2];
    if (total > voxel_cap)
        throw std::runtime_error("dense_reconstruct: voxel count " + std::to_string(total) +
                                 " exceeds cap " + std::to_string(voxel_cap));
    std::vector<std::vector<double>> out(static_cast<size_t>(g.feature_dim),
                                         std::vector<double>(total, 0.0));
    for (int ix = 0; ix < res[0]; ++ix)
        for (int iy = 0; iy < res[1]; ++iy)
            for (int iz = 0; iz < res[2]; ++iz) {
                std::size_t idx = (static_cast<std::size_t>(ix) * res[1] + iy) * res[2] + iz;
                for (int c = 0; c < g.factors.component_count(); ++c) {
                    double w = g.factors.component_at_node(c, ix, iy, iz);
                    auto b = g.basis_vector(c);
                    for (int p = 0; p < g.feature_dim; ++p)
                        out[static_cast<size_t>(p)][idx] += w * b[static_cast<size_t>(p)];
                }
            }
    return out;
}

}  // namespace fewt::grid
