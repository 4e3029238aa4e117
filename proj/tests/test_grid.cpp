#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fewt/grid.hpp"
#include "helpers.hpp"

using namespace fewt;
using grid::DensityActivation;
using grid::Factorization;

namespace {

grid::GridGeometry small_geom(int n = 4) {
    return {{n, n, n}, {-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
}

Vec3 random_interior_point(Rng& rng, const grid::GridGeometry& g) {
    Vec3 p;
    for (int a = 0; a < 3; ++a)
        p[a] = rng.uniform(g.aabb_min[a] + 1e-9, g.aabb_max[a] - 1e-9);
    return p;
}

}  // namespace

TEST_CASE("zero factors give zero density everywhere") {
    grid::DensityGrid g(small_geom(), Factorization::VM, 2, DensityActivation::Relu);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        Vec3 p = random_interior_point(rng, g.factors.geometry());
        CHECK(g.eval_raw(p) == 0.0);
        CHECK(g.eval(p) == 0.0);
    }
}

TEST_CASE("constant factors give raw value 3 = one per mode") {
    grid::DensityGrid g(small_geom(), Factorization::VM, 1, DensityActivation::Relu);
    g.factors.fill(1.0);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        Vec3 p = random_interior_point(rng, g.factors.geometry());
        CHECK(g.eval_raw(p) == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("partition of unity: constant field interpolates exactly") {
    // Interpolating an all-ones separable field probes the stencil weights:
    // any deviation from sum 1 shows up in the value.
    for (auto f : {Factorization::VM, Factorization::CP}) {
        grid::FactorGrid g(small_geom(5), f, 1);
        for (double& v : g.data()) v = 1.0;
        Rng rng(3);
        std::vector<double> comps(static_cast<size_t>(g.component_count()));
        for (int i = 0; i < 200; ++i) {
            Vec3 p = random_interior_point(rng, g.geometry());
            g.eval_components(p, comps);
            for (double c : comps) CHECK(std::abs(c - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("outside-AABB points are culled to zero") {
    grid::DensityGrid g(small_geom(), Factorization::VM, 1, DensityActivation::Relu);
    g.factors.fill(1.0);
    CHECK(g.eval_raw({2.0, 0.0, 0.0}) == 0.0);
    CHECK(g.eval_raw({0.0, -5.0, 0.0}) == 0.0);

    grid::AppearanceGrid a(small_geom(), Factorization::VM, 1, 4);
    a.factors.fill(1.0);
    std::fill(a.basis.begin(), a.basis.end(), 1.0);
    std::vector<double> feat(4);
    a.eval({0.0, 0.0, 9.0}, feat);
    for (double v : feat) CHECK(v == 0.0);
}

TEST_CASE("dense_reconstruct hand cases") {
    SUBCASE("zero factors") {
        grid::FactorGrid g(small_geom(2), Factorization::VM, 1);
        for (double v : grid::dense_reconstruct(g)) CHECK(v == 0.0);
    }
    SUBCASE("rank-1 separable slabs") {
        grid::GridGeometry geom{{2, 2, 2}, {0, 0, 0}, {1, 1, 1}};
        grid::FactorGrid g(geom, Factorization::VM, 1);
        auto line_x = g.line(0, 0);
        line_x[0] = 1.0;
        line_x[1] = 2.0;
        for (double& v : g.plane(0, 0)) v = 1.0;
        auto dense = grid::dense_reconstruct(g);
        for (int ix = 0; ix < 2; ++ix)
            for (int iy = 0; iy < 2; ++iy)
                for (int iz = 0; iz < 2; ++iz) {
                    double want = ix == 0 ? 1.0 : 2.0;
                    CHECK(dense[(static_cast<std::size_t>(ix) * 2 + iy) * 2 + iz] ==
                          doctest::Approx(want));
                }
    }
    SUBCASE("cap is enforced") {
        grid::FactorGrid g(small_geom(8), Factorization::VM, 1);
        CHECK_THROWS(grid::dense_reconstruct(g, 100));
    }
}

TEST_CASE("node exactness: interpolation at nodes matches dense values") {
    Rng rng(11);
    grid::FactorGrid g(small_geom(4), Factorization::VM, 2);
    g.init_random(rng, 0.5);
    auto dense = grid::dense_reconstruct(g);
    const auto& geom = g.geometry();
    std::vector<double> comps(static_cast<size_t>(g.component_count()));
    for (int ix = 0; ix < 4; ++ix)
        for (int iy = 0; iy < 4; ++iy)
            for (int iz = 0; iz < 4; ++iz) {
                Vec3 p{geom.node_coord(0, ix), geom.node_coord(1, iy), geom.node_coord(2, iz)};
                g.eval_components(p, comps);
                double sum = 0.0;
                for (double c : comps) sum += c;
                CHECK(sum == doctest::Approx(
                                 dense[(static_cast<std::size_t>(ix) * 4 + iy) * 4 + iz])
                                 .epsilon(1e-12));
            }
}

TEST_CASE("factorization matches dense reconstruction at random points") {
    Rng rng(42);
    for (auto f : {Factorization::VM, Factorization::CP}) {
        for (int trial = 0; trial < 5; ++trial) {
            int n = 3 + static_cast<int>(rng.uniform_index(6));
            int rank = 1 + static_cast<int>(rng.uniform_index(3));
            grid::FactorGrid g(small_geom(n), f, rank);
            g.init_random(rng, 0.7);
            auto dense = grid::dense_reconstruct(g);
            std::vector<double> comps(static_cast<size_t>(g.component_count()));
            for (int i = 0; i < 100; ++i) {
                Vec3 p = random_interior_point(rng, g.geometry());
                g.eval_components(p, comps);
                double direct = 0.0;
                for (double c : comps) direct += c;
                double oracle = fewt::test::trilinear_dense(dense, g.geometry(), p);
                CHECK(std::abs(direct - oracle) < 1e-6);
            }
        }
    }
}

TEST_CASE("appearance evaluation matches per-channel dense reconstruction") {
    Rng rng(5);
    grid::AppearanceGrid a(small_geom(4), Factorization::VM, 2, 5);
    a.init_random(rng, 0.6);
    auto dense = grid::dense_reconstruct(a);
    std::vector<double> feat(5);
    for (int i = 0; i < 100; ++i) {
        Vec3 p = random_interior_point(rng, a.factors.geometry());
        a.eval(p, feat);
        for (int c = 0; c < 5; ++c) {
            double oracle =
                fewt::test::trilinear_dense(dense[static_cast<size_t>(c)], a.factors.geometry(), p);
            CHECK(std::abs(feat[static_cast<size_t>(c)] - oracle) < 1e-6);
        }
    }
}

TEST_CASE("basis hand cases") {
    grid::AppearanceGrid a(small_geom(), Factorization::VM, 1, 4);
    SUBCASE("zero basis gives zero features") {
        a.factors.fill(1.0);
        std::vector<double> feat(4);
        a.eval({0.1, 0.2, 0.3}, feat);
        for (double v : feat) CHECK(v == 0.0);
    }
    SUBCASE("unit basis sums the component values") {
        a.factors.fill(1.0);
        for (int c = 0; c < 3; ++c) a.basis_vector(c)[0] = 1.0;  // b = e_1 for all modes
        std::vector<double> feat(4);
        a.eval({0.1, 0.2, 0.3}, feat);
        CHECK(feat[0] == doctest::Approx(3.0));
        CHECK(feat[1] == 0.0);
        CHECK(feat[2] == 0.0);
        CHECK(feat[3] == 0.0);
    }
}

TEST_CASE("grad_components: zero upstream, node stencil, finite differences") {
    Rng rng(9);
    SUBCASE("zero upstream leaves the buffer zero") {
        grid::FactorGrid g(small_geom(), Factorization::VM, 2);
        g.init_random(rng, 0.4);
        std::vector<double> grad(g.data().size(), 0.0);
        std::vector<double> upstream(static_cast<size_t>(g.component_count()), 0.0);
        g.grad_components({0.3, -0.2, 0.7}, upstream, grad);
        for (double v : grad) CHECK(v == 0.0);
    }
    SUBCASE("at a node the line gradient equals the plane value") {
        grid::FactorGrid g(small_geom(4), Factorization::VM, 1);
        g.init_random(rng, 0.4);
        const auto& geom = g.geometry();
        Vec3 node{geom.node_coord(0, 2), geom.node_coord(1, 1), geom.node_coord(2, 3)};
        std::vector<double> grad(g.data().size(), 0.0);
        std::vector<double> upstream{1.0, 0.0, 0.0};  // mode X component only
        g.grad_components(node, upstream, grad);
        // d(comp_X)/d(line_X[2]) = plane_X(y=1, z=3), stencil weight 1.
        double plane_value = g.plane(0, 0)[static_cast<std::size_t>(1) * 4 + 3];
        // line X of rank 0 starts at offset 0.
        CHECK(grad[2] == doctest::Approx(plane_value).epsilon(1e-12));
    }
    for (auto f : {Factorization::VM, Factorization::CP}) {
        CAPTURE(static_cast<int>(f));
        grid::FactorGrid g(small_geom(4), f, 2);
        g.init_random(rng, 0.5);
        Vec3 p = random_interior_point(rng, g.geometry());
        std::vector<double> upstream(static_cast<size_t>(g.component_count()));
        for (double& u : upstream) u = rng.normal();

        std::vector<double> grad(g.data().size(), 0.0);
        g.grad_components(p, upstream, grad);

        auto objective = [&] {
            std::vector<double> comps(static_cast<size_t>(g.component_count()));
            g.eval_components(p, comps);
            double s = 0.0;
            for (std::size_t c = 0; c < comps.size(); ++c) s += comps[c] * upstream[c];
            return s;
        };
        int checked = 0;
        for (std::size_t i = 0; i < g.data().size(); ++i) {
            double fd = fewt::test::central_difference(g.data()[i], objective);
            if (std::abs(fd) < 1e-9 && std::abs(grad[i]) < 1e-9) continue;
            CHECK(fewt::test::rel_error(grad[i], fd) < 1e-5);
            ++checked;
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("upsample") {
    Rng rng(21);
    SUBCASE("identity resolution preserves the field") {
        grid::FactorGrid g(small_geom(4), Factorization::VM, 2);
        g.init_random(rng, 0.5);
        grid::FactorGrid up = g.upsampled({4, 4, 4});
        std::vector<double> a(static_cast<size_t>(g.component_count()));
        std::vector<double> b(a.size());
        for (int i = 0; i < 50; ++i) {
            Vec3 p = random_interior_point(rng, g.geometry());
            g.eval_components(p, a);
            up.eval_components(p, b);
            for (std::size_t c = 0; c < a.size(); ++c)
                CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-12));
        }
    }
    SUBCASE("constant factors stay constant") {
        grid::FactorGrid g(small_geom(3), Factorization::VM, 1);
        for (double& v : g.data()) v = 1.0;
        grid::FactorGrid up = g.upsampled({6, 6, 6});
        for (double v : up.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("a linear ramp stays linear") {
        grid::GridGeometry geom{{2, 2, 2}, {0, 0, 0}, {1, 1, 1}};
        grid::FactorGrid g(geom, Factorization::CP, 1);
        auto lx = g.line(0, 0);
        lx[0] = 0.0;
        lx[1] = 1.0;
        grid::FactorGrid up = g.upsampled({3, 2, 2});
        auto lx_up = up.line(0, 0);
        CHECK(lx_up[0] == doctest::Approx(0.0));
        CHECK(lx_up[1] == doctest::Approx(0.5));
        CHECK(lx_up[2] == doctest::Approx(1.0));
    }
    SUBCASE("shrinking is rejected") {
        grid::FactorGrid g(small_geom(4), Factorization::VM, 1);
        CHECK_THROWS(g.upsampled({3, 4, 4}));
    }
}

TEST_CASE("geometry validation") {
    grid::GridGeometry bad{{1, 4, 4}, {-1, -1, -1}, {1, 1, 1}};
    CHECK_THROWS(bad.validate());
    grid::GridGeometry flipped{{4, 4, 4}, {1, -1, -1}, {-1, 1, 1}};
    CHECK_THROWS(flipped.validate());
    CHECK_THROWS(grid::AppearanceGrid(small_geom(), Factorization::VM, 1, 2));
}

TEST_CASE("density activations") {
    CHECK(grid::activate_density(-3.0, DensityActivation::Relu) == 0.0);
    CHECK(grid::activate_density(2.5, DensityActivation::Relu) == 2.5);
    CHECK(grid::activate_density(0.0, DensityActivation::Softplus) ==
          doctest::Approx(std::log(2.0)));
    // softplus stays finite and positive far out
    CHECK(grid::activate_density(-40.0, DensityActivation::Softplus) > 0.0);
    CHECK(grid::activate_density(40.0, DensityActivation::Softplus) ==
          doctest::Approx(40.0).epsilon(1e-12));
}
