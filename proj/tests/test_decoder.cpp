#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fewt/decoder.hpp"
#include "helpers.hpp"

using namespace fewt;

TEST_CASE("zero parameters decode to mid-gray") {
    decoder::Decoder d(6, {8, 8});
    std::vector<double> input{0.4, -1.0, 0.2, 0.0, 2.0, -0.3};
    auto rgb = d.decode(input);
    for (double c : rgb) CHECK(c == doctest::Approx(0.5));
}

TEST_CASE("decode is deterministic") {
    Rng rng(4);
    decoder::Decoder d(5, {16});
    d.init_random(rng);
    std::vector<double> input{0.1, 0.2, 0.3, 0.4, 0.5};
    auto a = d.decode(input);
    auto b = d.decode(input);
    CHECK(a == b);
}

TEST_CASE("single-layer decoder matches a hand-computed affine + sigmoid") {
    decoder::Decoder d(4, {});
    REQUIRE(d.layer_count() == 1);
    auto W = d.weight(0);
    auto b = d.bias(0);
    std::vector<double> w_row{0.5, -0.25, 1.0, 2.0};
    for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 4; ++i) W[static_cast<size_t>(o * 4 + i)] = w_row[static_cast<size_t>(i)] * (o + 1);
    b[0] = 0.1;
    b[1] = -0.2;
    b[2] = 0.0;

    std::vector<double> x{1.0, 2.0, -1.0, 0.5};
    auto rgb = d.decode(x);
    for (int o = 0; o < 3; ++o) {
        double z = b[static_cast<size_t>(o)];
        for (int i = 0; i < 4; ++i) z += W[static_cast<size_t>(o * 4 + i)] * x[static_cast<size_t>(i)];
        CHECK(rgb[static_cast<size_t>(o)] == doctest::Approx(1.0 / (1.0 + std::exp(-z))));
    }
}

TEST_CASE("outputs stay in (0,1) and finite under fuzzing") {
    Rng rng(77);
    decoder::Decoder d(10, {32, 32});
    d.init_random(rng);
    std::vector<double> x(10);
    for (int trial = 0; trial < 200; ++trial) {
        // Extreme magnitudes may saturate the sigmoid to exactly 0 or 1 in
        // floating point; finiteness and range are the invariants.
        for (double& v : x) v = rng.normal() * std::pow(10.0, rng.uniform(-2.0, 3.0));
        auto rgb = d.decode(x);
        for (double c : rgb) {
            CHECK(std::isfinite(c));
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
        }
    }
    for (int trial = 0; trial < 100; ++trial) {
        for (double& v : x) v = rng.normal();
        auto rgb = d.decode(x);
        for (double c : rgb) {
            CHECK(c > 0.0);
            CHECK(c < 1.0);
        }
    }
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    Rng rng(5);
    decoder::Decoder d(4, {8});
    d.init_random(rng);
    std::vector<double> x{0.3, -0.1, 0.8, 0.0};
    decoder::Decoder::Workspace ws;
    d.forward_batch(x, 1, ws);
    std::vector<double> gp(d.params.size(), 0.0), gx(4, 0.0);
    std::vector<double> upstream{0.0, 0.0, 0.0};
    d.backward_batch(x, 1, ws, upstream, gp, gx);
    for (double g : gp) CHECK(g == 0.0);
    for (double g : gx) CHECK(g == 0.0);
}

TEST_CASE("backward matches finite differences on a 4-8-3 decoder") {
    Rng rng(6);
    decoder::Decoder d(4, {8});
    d.init_random(rng);
    std::vector<double> x{0.3, -0.6, 0.8, 0.15};
    std::vector<double> upstream{0.7, -1.3, 0.4};

    auto objective = [&] {
        auto rgb = d.decode(x);
        return rgb[0] * upstream[0] + rgb[1] * upstream[1] + rgb[2] * upstream[2];
    };

    decoder::Decoder::Workspace ws;
    d.forward_batch(x, 1, ws);
    std::vector<double> gp(d.params.size(), 0.0), gx(4, 0.0);
    d.backward_batch(x, 1, ws, upstream, gp, gx);

    for (std::size_t i = 0; i < d.params.size(); ++i) {
        double fd = fewt::test::central_difference(d.params[i], objective);
        if (std::abs(fd) < 1e-10 && std::abs(gp[i]) < 1e-10) continue;
        CHECK(fewt::test::rel_error(gp[i], fd) < 1e-5);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        double fd = fewt::test::central_difference(x[i], objective);
        CHECK(fewt::test::rel_error(gx[i], fd) < 1e-5);
    }
}

TEST_CASE("gradient check across the default layer shapes") {
    Rng rng(13);
    for (const auto& hidden : {std::vector<int>{}, {16}, {16, 16}}) {
        decoder::Decoder d(6, hidden);
        d.init_random(rng);
        std::vector<double> x(6);
        for (double& v : x) v = rng.normal();
        std::vector<double> upstream{0.5, 0.25, -0.75};
        auto objective = [&] {
            auto rgb = d.decode(x);
            return rgb[0] * upstream[0] + rgb[1] * upstream[1] + rgb[2] * upstream[2];
        };
        decoder::Decoder::Workspace ws;
        d.forward_batch(x, 1, ws);
        std::vector<double> gp(d.params.size(), 0.0), gx(6, 0.0);
        d.backward_batch(x, 1, ws, upstream, gp, gx);
        int checked = 0;
        for (std::size_t i = 0; i < d.params.size(); i += 7) {
            double fd = fewt::test::central_difference(d.params[i], objective);
            if (std::abs(fd) < 1e-10 && std::abs(gp[i]) < 1e-10) continue;
            CHECK(fewt::test::rel_error(gp[i], fd) < 1e-5);
            ++checked;
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    decoder::Decoder d(4, {8});
    decoder::Decoder::Workspace ws;
    std::vector<double> wrong{1.0, 2.0, 3.0};
    CHECK_THROWS(d.forward_batch(wrong, 1, ws));
}
