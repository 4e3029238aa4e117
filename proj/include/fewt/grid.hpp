#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fewt/geometry.hpp"
#include "fewt/rng.hpp"

namespace fewt::grid {

enum class Factorization { VM, CP };
enum class DensityActivation { Softplus, Relu };

struct GridGeometry {
    std::array<int, 3> resolution{2, 2, 2};
    Vec3 aabb_min{-1.0, -1.0, -1.0};
    Vec3 aabb_max{1.0, 1.0, 1.0};

    void validate() const;
    Aabb aabb() const { return {aabb_min, aabb_max}; }
    // Cell-vertex convention: node i sits at aabb_min + i * extent / (N-1),
    // so both AABB corners are exact nodes.
    double node_coord(int axis, int index) const;
};

struct AxisStencil {
    int i0 = 0;
    double frac = 0.0;  // value = (1-frac)*v[i0] + frac*v[i0+1]
};

AxisStencil axis_stencil(const GridGeometry& g, int axis, double coord);

// Low-rank factor storage shared by the density and appearance grids.
//
// VM: component (r, m) evaluates to line^m_r(coord_m) * plane^m_r(a, b) where
//     (a, b) are the two complementary axes in ascending order; 3*rank
//     components, indexed rank-major (index = 3*r + m).
// CP: component r evaluates to line^X_r(x) * line^Y_r(y) * line^Z_r(z);
//     rank components.
//
// Data layout (one contiguous array, mirrored by gradient buffers and the
// checkpoint format): for each mode X,Y,Z all rank lines, then for each mode
// X,Y,Z all rank planes (VM only). Planes are row-major with the second
// complementary axis fastest.
class FactorGrid {
public:
    FactorGrid() = default;
    FactorGrid(GridGeometry geometry, Factorization factorization, int rank);

    const GridGeometry& geometry() const { return geometry_; }
    Factorization factorization() const { return factorization_; }
    int rank() const { return rank_; }
    int component_count() const { return factorization_ == Factorization::VM ? 3 * rank_ : rank_; }

    std::span<double> line(int mode, int r);
    std::span<const double> line(int mode, int r) const;
    std::span<double> plane(int mode, int r);
    std::span<const double> plane(int mode, int r) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double value);
    void init_random(Rng& rng, double scale);

    // Component values at a point inside the AABB. out.size() == component_count().
    void eval_components(const Vec3& x, std::span<double> out) const;

    // Accumulates d(component)/d(factor entry) * upstream[c] for every
    // component into grad (same layout/size as data()). Only stencil entries
    // are touched.
    void grad_components(const Vec3& x, std::span<const double> upstream,
                         std::span<double> grad) const;

    // Exact component value at a grid node (no interpolation).
    double component_at_node(int comp, int ix, int iy, int iz) const;

    // Linear/bilinear resampling of all factors to a higher resolution.
    FactorGrid upsampled(const std::array<int, 3>& new_resolution) const;

    // Plane extents for mode m: axes (a, b) with a < b, m excluded.
    static std::array<int, 2> plane_axes(int mode);

private:
    GridGeometry geometry_;
    Factorization factorization_ = Factorization::VM;
    int rank_ = 0;
    std::array<std::size_t, 3> line_base_{};
    std::array<std::size_t, 3> plane_base_{};
    std::vector<double> data_;
};

double activate_density(double raw, DensityActivation act);
double activate_density_grad(double raw, DensityActivation act);

struct DensityGrid {
    FactorGrid factors;
    DensityActivation activation = DensityActivation::Softplus;

    DensityGrid() = default;
    DensityGrid(GridGeometry geometry, Factorization f, int rank,
                DensityActivation act = DensityActivation::Softplus)
        : factors(geometry, f, rank), activation(act) {}

    // Pre-activation factor sum; zero outside the AABB (culled, not an error).
    double eval_raw(const Vec3& x) const;
    double eval(const Vec3& x) const { return activate_density(eval_raw(x), activation); }
};

struct AppearanceGrid {
    FactorGrid factors;
    int feature_dim = 3;              // P
    std::vector<double> basis;        // [component][P], component-major

    AppearanceGrid() = default;
    AppearanceGrid(GridGeometry geometry, Factorization f, int rank, int feature_dim);

    std::span<double> basis_vector(int comp);
    std::span<const double> basis_vector(int comp) const;

    void init_random(Rng& rng, double factor_scale);

    // Unactivated feature vector; zero outside the AABB.
    void eval(const Vec3& x, std::span<double> out) const;
};

// Materializes the factor sum at every grid node, z index fastest:
// entry index = (ix * Ny + iy) * Nz + iz. Refuses when the voxel count
// exceeds the cap.
std::vector<double> dense_reconstruct(const FactorGrid& g, std::size_t voxel_cap = 1u << 24);

// One dense array per feature channel.
std::vector<std::vector<double>> dense_reconstruct(const AppearanceGrid& g,
                                                   std::size_t voxel_cap = 1u << 24);

}  // namespace fewt::grid
