#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fewt/freq_mask.hpp"
#include "helpers.hpp"

using namespace fewt;
using freq_mask::MaskVector;

TEST_CASE("dynamic mask returns all ones once the horizon is reached") {
    for (int t : {100, 101, 250}) {
        MaskVector m = freq_mask::dynamic_mask(t, 100, 16);
        for (double v : m) CHECK(v == 1.0);
    }
}

TEST_CASE("dynamic mask hand values") {
    MaskVector m0 = freq_mask::dynamic_mask(0, 100, 10);
    MaskVector want0{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    REQUIRE(m0.size() == want0.size());
    for (std::size_t i = 0; i < m0.size(); ++i) CHECK(m0[i] == doctest::Approx(want0[i]));

    MaskVector m25 = freq_mask::dynamic_mask(25, 100, 10);
    MaskVector want25{1, 1, 1, 1, 1, 0.5, 0, 0, 0, 0};
    for (std::size_t i = 0; i < m25.size(); ++i) CHECK(m25[i] == doctest::Approx(want25[i]));
}

TEST_CASE("dynamic mask saturates when the pointer passes the length") {
    // Small L: t*L/T + 3 >= L well before t = T.
    MaskVector m = freq_mask::dynamic_mask(50, 100, 4);
    for (double v : m) CHECK(v == 1.0);
}

TEST_CASE("mask monotonicity over a (t, i) sweep") {
    const int T = 50, L = 50;
    std::vector<MaskVector> masks;
    for (int t = 0; t <= T; ++t) masks.push_back(freq_mask::dynamic_mask(t, T, L));
    for (int t = 0; t <= T; ++t) {
        for (int i = 0; i + 1 < L; ++i) CHECK(masks[static_cast<size_t>(t)][static_cast<size_t>(i)] >= masks[static_cast<size_t>(t)][static_cast<size_t>(i) + 1]);
        if (t > 0)
            for (int i = 0; i < L; ++i)
                CHECK(masks[static_cast<size_t>(t)][static_cast<size_t>(i)] >=
                      masks[static_cast<size_t>(t) - 1][static_cast<size_t>(i)]);
    }
}

TEST_CASE("first mask entry is always binary") {
    for (int t = 0; t < 30; ++t) {
        MaskVector m = freq_mask::dynamic_mask(t, 30, 12);
        CHECK((m[0] == 0.0 || m[0] == 1.0));
        CHECK(m[0] == 1.0);  // dynamic pointer starts at 3
    }
    CHECK(freq_mask::fixed_ratio_mask(8, 0.0)[0] == 0.0);
    CHECK(freq_mask::fixed_ratio_mask(8, 0.5)[0] == 1.0);
}

TEST_CASE("fixed ratio mask") {
    MaskVector m = freq_mask::fixed_ratio_mask(10, 0.8);
    int ones = 0;
    for (double v : m) {
        CHECK((v == 0.0 || v == 1.0));
        ones += v == 1.0 ? 1 : 0;
    }
    CHECK(ones == 8);
    CHECK(m[7] == 1.0);
    CHECK(m[8] == 0.0);

    for (double v : freq_mask::fixed_ratio_mask(13, 1.0)) CHECK(v == 1.0);
    for (double v : freq_mask::fixed_ratio_mask(13, 0.0)) CHECK(v == 0.0);
}

TEST_CASE("apply_mask") {
    std::vector<double> values{2.0, 4.0, 6.0};
    MaskVector ones{1, 1, 1}, zeros{0, 0, 0}, mixed{1.0, 0.5, 0.0};

    CHECK(freq_mask::apply_mask(values, ones) == values);
    CHECK(freq_mask::apply_mask(values, zeros) == std::vector<double>{0, 0, 0});
    auto mixed_out = freq_mask::apply_mask(values, mixed);
    CHECK(mixed_out == std::vector<double>{2.0, 2.0, 0.0});
    // input untouched
    CHECK(values == std::vector<double>{2.0, 4.0, 6.0});

    CHECK_THROWS(freq_mask::apply_mask(values, MaskVector{1.0, 1.0}));
}

TEST_CASE("apply_mask is linear and idempotent for binary masks") {
    Rng rng(7);
    MaskVector mask{1, 1, 0, 1, 0};
    std::vector<double> a(5), b(5);
    for (int trial = 0; trial < 20; ++trial) {
        for (int i = 0; i < 5; ++i) {
            a[static_cast<size_t>(i)] = rng.normal();
            b[static_cast<size_t>(i)] = rng.normal();
        }
        double s = rng.normal();
        std::vector<double> combo(5);
        for (int i = 0; i < 5; ++i) combo[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] * s + b[static_cast<size_t>(i)];
        auto lhs = freq_mask::apply_mask(combo, mask);
        auto ma = freq_mask::apply_mask(a, mask);
        auto mb = freq_mask::apply_mask(b, mask);
        for (int i = 0; i < 5; ++i)
            CHECK(lhs[static_cast<size_t>(i)] ==
                  doctest::Approx(ma[static_cast<size_t>(i)] * s + mb[static_cast<size_t>(i)]));
        auto twice = freq_mask::apply_mask(ma, mask);
        CHECK(twice == ma);
    }
}

TEST_CASE("positional encoding basics") {
    const int n_freq = 1;
    std::vector<double> zero{0.0, 0.0, 0.0};
    std::vector<double> out(freq_mask::encoding_length(3, n_freq));
    freq_mask::positional_encoding(zero, n_freq, {}, out);
    // raw copy, then sin block, then cos block
    for (int d = 0; d < 3; ++d) CHECK(out[static_cast<size_t>(d)] == 0.0);
    for (int d = 3; d < 6; ++d) CHECK(out[static_cast<size_t>(d)] == 0.0);
    for (int d = 6; d < 9; ++d) CHECK(out[static_cast<size_t>(d)] == 1.0);

    std::vector<double> x{1.5707963267948966, 0.0, 0.0};
    freq_mask::MaskVector ones(6, 1.0);
    freq_mask::positional_encoding(x, n_freq, ones, out);
    CHECK(out[3] == doctest::Approx(1.0));
    CHECK(out[4] == doctest::Approx(0.0));
    CHECK(out[5] == doctest::Approx(0.0));
    CHECK(out[6] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out[7] == doctest::Approx(1.0));
    CHECK(out[8] == doctest::Approx(1.0));

    std::vector<double> unmasked(out.size());
    freq_mask::positional_encoding(x, n_freq, {}, unmasked);
    CHECK(out == unmasked);
}

TEST_CASE("positional encoding backward matches finite differences") {
    const int n_freq = 3, dim = 2;
    std::vector<double> x{0.37, -1.21};
    freq_mask::MaskVector mask(static_cast<size_t>(2 * n_freq * dim));
    Rng rng(3);
    for (double& m : mask) m = rng.uniform();
    std::vector<double> upstream(static_cast<size_t>(freq_mask::encoding_length(dim, n_freq)));
    for (double& u : upstream) u = rng.normal();

    auto value = [&] {
        std::vector<double> out(upstream.size());
        freq_mask::positional_encoding(x, n_freq, mask, out);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * upstream[i];
        return s;
    };
    std::vector<double> grad(static_cast<size_t>(dim), 0.0);
    freq_mask::positional_encoding_backward(x, n_freq, mask, upstream, grad);
    for (int d = 0; d < dim; ++d) {
        double fd = fewt::test::central_difference(x[static_cast<size_t>(d)], value, 1e-6);
        CHECK(fewt::test::rel_error(grad[static_cast<size_t>(d)], fd) < 1e-6);
    }
}

TEST_CASE("masked-out encoding entries are inert") {
    const int n_freq = 2, dim = 3;
    freq_mask::MaskVector mask(static_cast<size_t>(2 * n_freq * dim), 1.0);
    mask[4] = 0.0;
    mask[9] = 0.0;

    std::vector<double> x{0.2, -0.4, 1.1};
    std::vector<double> out(static_cast<size_t>(freq_mask::encoding_length(dim, n_freq)));
    freq_mask::positional_encoding(x, n_freq, mask, out);
    CHECK(out[static_cast<size_t>(dim) + 4] == 0.0);
    CHECK(out[static_cast<size_t>(dim) + 9] == 0.0);

    // Upstream on a masked entry produces no input gradient.
    std::vector<double> upstream(out.size(), 0.0);
    upstream[static_cast<size_t>(dim) + 4] = 2.5;
    std::vector<double> grad(static_cast<size_t>(dim), 0.0);
    freq_mask::positional_encoding_backward(x, n_freq, mask, upstream, grad);
    for (double g : grad) CHECK(g == 0.0);
}
