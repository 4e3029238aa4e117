#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fewt/geometry.hpp"
#include "fewt/grid.hpp"

namespace fewt::test {

// Independent trilinear interpolation over a dense node array (z fastest),
// kept separate from the factor-grid implementation on purpose: it is the
// oracle route for the factorization equivalence checks.
inline double trilinear_dense(const std::vector<double>& dense,
                              const grid::GridGeometry& geom, const Vec3& x) {
    const auto& res = geom.resolution;
    double u[3];
    int i0[3];
    for (int a = 0; a < 3; ++a) {
        int n = res[static_cast<size_t>(a)];
        double t = (x[a] - geom.aabb_min[a]) / (geom.aabb_max[a] - geom.aabb_min[a]) * (n - 1);
        int i = static_cast<int>(std::floor(t));
        if (i < 0) i = 0;
        if (i > n - 2) i = n - 2;
        i0[a] = i;
        u[a] = t - i;
    }
    auto at = [&](int i, int j, int k) {
        return dense[(static_cast<std::size_t>(i) * res[1] + j) * res[2] + k];
    };
    double acc = 0.0;
    for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz) {
                double w = (dx ? u[0] : 1.0 - u[0]) * (dy ? u[1] : 1.0 - u[1]) *
                           (dz ? u[2] : 1.0 - u[2]);
                acc += w * at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
            }
    return acc;
}

// Central finite difference through a parameter reference.
inline double central_difference(double& param, const std::function<double()>& f,
                                 double h = 1e-4) {
    double saved = param;
    param = saved + h;
    double up = f();
    param = saved - h;
    double down = f();
    param = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_error(double got, double want) {
    double denom = std::max(std::abs(got), std::abs(want));
    if (denom < 1e-12) return 0.0;
    return std::abs(got - want) / denom;
}

}  // namespace fewt::test
