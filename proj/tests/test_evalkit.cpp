#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "fewt/evalkit.hpp"
#include "fewt/io.hpp"
#include "fewt/mesh.hpp"
#include "helpers.hpp"

using namespace fewt;
namespace fs = std::filesystem;

namespace {

img::Image solid(int w, int h, float r, float g, float b) {
    img::Image im(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            im.at(x, y, 0) = r;
            im.at(x, y, 1) = g;
            im.at(x, y, 2) = b;
        }
    return im;
}

}  // namespace

TEST_CASE("psnr unit values") {
    img::Image a = solid(8, 8, 0.5f, 0.5f, 0.5f);

    CHECK(std::isinf(evalkit::psnr(a, a)));

    img::Image b = solid(8, 8, 0.6f, 0.6f, 0.6f);  // uniform error 0.1
    CHECK(evalkit::psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));

    img::Image c = solid(8, 8, 0.51f, 0.51f, 0.51f);  // uniform error 0.01
    CHECK(evalkit::psnr(a, c) == doctest::Approx(40.0).epsilon(1e-4));

    img::Image wrong(4, 4);
    CHECK_THROWS(evalkit::psnr(a, wrong));
}

TEST_CASE("psnr is symmetric and monotone in the error magnitude") {
    Rng rng(3);
    img::Image a(6, 6), b(6, 6);
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        a.rgb[i] = static_cast<float>(rng.uniform());
        b.rgb[i] = static_cast<float>(rng.uniform());
    }
    CHECK(evalkit::psnr(a, b) == evalkit::psnr(b, a));

    img::Image base = solid(6, 6, 0.5f, 0.5f, 0.5f);
    double prev = std::numeric_limits<double>::infinity();
    for (float err : {0.01f, 0.02f, 0.05f, 0.1f, 0.2f}) {
        img::Image noisy = solid(6, 6, 0.5f + err, 0.5f + err, 0.5f + err);
        double v = evalkit::psnr(base, noisy);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("quantized psnr rounds to 8-bit levels first") {
    img::Image a = solid(4, 4, 0.5f, 0.5f, 0.5f);
    img::Image b = solid(4, 4, 0.5f + 0.4f / 255.0f, 0.5f, 0.5f);
    // same 8-bit level -> identical after quantization
    CHECK(std::isinf(evalkit::psnr_quantized(a, b)));
    CHECK_FALSE(std::isinf(evalkit::psnr(a, b)));
}

TEST_CASE("evaluate writes a coherent report") {
    ModelConfig mc;
    mc.resolution = {8, 8, 8};
    mc.rank_density = 1;
    mc.rank_appearance = 1;
    mc.feature_dim = 3;
    mc.decoder_hidden = {8};
    mc.n_freq_features = 1;
    mc.n_freq_dir = 1;
    mc.density_activation = grid::DensityActivation::Relu;
    Model model = Model::create(mc, {}, 3);
    model.density.factors.fill(0.0);  // empty scene

    render::RenderSettings settings;
    settings.n_samples = 8;
    settings.background = {1, 1, 1};

    // gt views: one exactly background (infinite PSNR), one with uniform 0.1
    // error (20 dB)
    dataset::PosedImage white;
    white.camera.width = 10;
    white.camera.height = 10;
    white.camera.camera_angle_x = 0.8;
    white.camera.camera_to_world.at(2, 3) = 4.0;
    white.image = solid(10, 10, 1.0f, 1.0f, 1.0f);

    dataset::PosedImage off_white = white;
    off_white.image = solid(10, 10, 0.9f, 0.9f, 0.9f);

    fs::path dir = fs::temp_directory_path() / "fewt_eval_test";
    fs::remove_all(dir);
    evalkit::EvalOptions opts;
    opts.config_hash = "deadbeef";
    auto report = evalkit::evaluate(model, settings, {white, off_white}, dir.string(), opts);

    REQUIRE(report.per_view_psnr.size() == 2);
    CHECK(std::isinf(report.per_view_psnr[0]));
    CHECK(report.per_view_psnr[1] == doctest::Approx(20.0).epsilon(1e-4));
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "test_000.png"));
    CHECK(fs::exists(dir / "test_001.png"));

    std::string csv = io::read_file((dir / "report.csv").string());
    CHECK(csv.find("view,psnr") == 0);
    CHECK(csv.find("inf") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("report mean is the arithmetic mean") {
    evalkit::EvalReport r;
    r.per_view_psnr = {20.0, 30.0};
    double sum = 0.0;
    for (double v : r.per_view_psnr) sum += v;
    r.mean_psnr = sum / 2.0;
    CHECK(r.mean_psnr == doctest::Approx(25.0).epsilon(1e-12));
    std::string csv = evalkit::report_csv(r);
    CHECK(csv == "view,psnr\n0,20.000000\n1,30.000000\n");
}

TEST_CASE("marching cubes: empty field yields a valid empty STL") {
    mesh::ScalarField zero = [](const Vec3&) { return 0.0; };
    fs::path path = fs::temp_directory_path() / "fewt_empty.stl";
    std::size_t n = mesh::export_mesh(zero, {{-1, -1, -1}, {1, 1, 1}}, 1.0, {16, 16, 16},
                                      path.string());
    CHECK(n == 0);
    std::string bytes = io::read_file(path.string());
    CHECK(bytes.size() == 84);  // header + zero triangle count
    std::uint32_t count;
    std::memcpy(&count, bytes.data() + 80, 4);
    CHECK(count == 0);
    fs::remove(path.string());
}

TEST_CASE("marching cubes: sphere vertices sit on the iso radius") {
    mesh::ScalarField sphere = [](const Vec3& p) { return dot(p, p) < 0.25 ? 50.0 : 0.0; };
    Aabb box{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};
    auto tris = mesh::marching_cubes(sphere, box, {64, 64, 64}, 25.0);
    REQUIRE(tris.size() > 100);
    double voxel = 3.0 / 63.0;
    for (const auto& t : tris)
        for (const auto& v : t.v) CHECK(std::abs(norm(v) - 0.5) < 2.0 * voxel);
}

TEST_CASE("marching cubes: translating the box translates the vertices") {
    mesh::ScalarField sphere = [](const Vec3& p) {
        Vec3 c{p.x - 0.5, p.y - 0.5, p.z - 0.5};
        return dot(c, c) < 0.1 ? 10.0 : 0.0;
    };
    mesh::ScalarField sphere0 = [](const Vec3& p) { return dot(p, p) < 0.1 ? 10.0 : 0.0; };
    Aabb box0{{-1, -1, -1}, {1, 1, 1}};
    Aabb box1{{-0.5, -0.5, -0.5}, {1.5, 1.5, 1.5}};
    auto t0 = mesh::marching_cubes(sphere0, box0, {24, 24, 24}, 5.0);
    auto t1 = mesh::marching_cubes(sphere, box1, {24, 24, 24}, 5.0);
    REQUIRE(t0.size() == t1.size());
    for (std::size_t i = 0; i < t0.size(); ++i)
        for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c)
                CHECK(t1[i].v[static_cast<size_t>(k)][c] ==
                      doctest::Approx(t0[i].v[static_cast<size_t>(k)][c] + 0.5).epsilon(1e-9));
}

TEST_CASE("marching cubes triangle count is deterministic") {
    mesh::ScalarField blob = [](const Vec3& p) {
        return std::exp(-4.0 * dot(p, p)) * 20.0;
    };
    Aabb box{{-1, -1, -1}, {1, 1, 1}};
    auto a = mesh::marching_cubes(blob, box, {20, 20, 20}, 5.0);
    auto b = mesh::marching_cubes(blob, box, {20, 20, 20}, 5.0);
    CHECK(a.size() == b.size());
    CHECK(a.size() > 0);
}

TEST_CASE("export_mesh over a trained-style density grid") {
    // Fit nothing: hand-build a separable density bump and check the STL has
    // content and the resolution cap triggers.
    grid::GridGeometry geom{{16, 16, 16}, {-1, -1, -1}, {1, 1, 1}};
    grid::DensityGrid g(geom, grid::Factorization::VM, 1, grid::DensityActivation::Relu);
    for (int m = 0; m < 3; ++m) {
        auto line = g.factors.line(m, 0);
        for (int i = 0; i < 16; ++i)
            line[static_cast<size_t>(i)] = std::exp(-0.5 * (i - 7.5) * (i - 7.5));
        for (double& v : g.factors.plane(m, 0)) v = 1.0;
    }
    fs::path path = fs::temp_directory_path() / "fewt_grid.stl";
    std::size_t n = mesh::export_mesh(g, 0.5, {24, 24, 24}, path.string());
    CHECK(n > 0);
    CHECK_THROWS(mesh::export_mesh(g, 0.5, {512, 512, 512}, path.string(), 1u << 20));
    fs::remove(path.string());
}

TEST_CASE("memorized view at MSE 1e-6 reads 60 dB") {
    img::Image gt = solid(8, 8, 0.4f, 0.4f, 0.4f);
    img::Image near = solid(8, 8, 0.4f + 0.001f, 0.4f + 0.001f, 0.4f + 0.001f);
    CHECK(evalkit::psnr(near, gt) == doctest::Approx(60.0).epsilon(1e-3));
}
