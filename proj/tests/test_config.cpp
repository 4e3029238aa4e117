#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fewt/config.hpp"
#include "helpers.hpp"

using namespace fewt;
using json = nlohmann::json;

TEST_CASE("defaults parse and round trip") {
    config::RunConfig cfg = config::from_json(config::default_json());
    CHECK(cfg.train.iterations == 15000);
    CHECK(cfg.train.ray_batch_size == 1024);
    CHECK(cfg.model.factorization == grid::Factorization::VM);
    CHECK(cfg.render.n_samples == 128);
    // Parsing a resolved config is a fixed point.
    config::RunConfig again = config::from_json(config::to_json(cfg));
    CHECK(config::to_json(again) == config::to_json(cfg));
}

TEST_CASE("an empty document yields pure defaults") {
    config::RunConfig cfg = config::from_json(json::object());
    CHECK(cfg.train.lr_grid == 0.02);
    CHECK(cfg.masks.enabled);
}

TEST_CASE("unknown keys are rejected with their path") {
    json doc = {{"train", {{"iterationz", 10}}}};
    CHECK_THROWS_WITH_AS(config::from_json(doc), doctest::Contains("train.iterationz"),
                         std::runtime_error);
    json doc2 = {{"bogus_section", 1}};
    CHECK_THROWS_WITH_AS(config::from_json(doc2), doctest::Contains("bogus_section"),
                         std::runtime_error);
}

TEST_CASE("mask horizons default to 90% of the run") {
    json doc = {{"train", {{"iterations", 1000}}}};
    config::RunConfig cfg = config::from_json(doc);
    CHECK(cfg.masks.density.total_reg_iters == 900);
    CHECK(cfg.masks.encoding.total_reg_iters == 900);

    json doc2 = {{"train", {{"iterations", 1000},
                            {"masks", {{"density", {{"mode", "dynamic"},
                                                    {"total_iters", 123},
                                                    {"v_ratio", 1.0}}}}}}}};
    config::RunConfig cfg2 = config::from_json(doc2);
    CHECK(cfg2.masks.density.total_reg_iters == 123);
    CHECK(cfg2.masks.appearance.total_reg_iters == 900);
}

TEST_CASE("overrides parse typed values and reject unknown paths") {
    json doc = json::object();
    config::apply_override(doc, "train.iterations=42");
    config::apply_override(doc, "model.density_activation=relu");
    config::apply_override(doc, "render.jitter=false");
    config::apply_override(doc, "dataset.root=/tmp/scene");
    config::RunConfig cfg = config::from_json(doc);
    CHECK(cfg.train.iterations == 42);
    CHECK(cfg.model.density_activation == grid::DensityActivation::Relu);
    CHECK_FALSE(cfg.render.jitter);
    CHECK(cfg.dataset.root == "/tmp/scene");

    CHECK_THROWS_WITH_AS(config::apply_override(doc, "train.nope=1"),
                         doctest::Contains("train.nope"), std::runtime_error);
    CHECK_THROWS_AS(config::apply_override(doc, "no_equals_sign"), std::runtime_error);
}

TEST_CASE("field validation") {
    json bad_ratio = {{"train", {{"masks", {{"density", {{"mode", "fixed_ratio"},
                                                         {"total_iters", 1},
                                                         {"v_ratio", 1.5}}}}}}}};
    CHECK_THROWS(config::from_json(bad_ratio));

    json bad_mode = {{"train", {{"masks", {{"density", {{"mode", "nope"},
                                                        {"total_iters", 1},
                                                        {"v_ratio", 1.0}}}}}}}};
    CHECK_THROWS(config::from_json(bad_mode));

    json bad_fact = {{"model", {{"factorization", "tucker"}}}};
    CHECK_THROWS(config::from_json(bad_fact));

    json bad_near = {{"render", {{"near", 5.0}, {"far", 2.0}}}};
    CHECK_THROWS(config::from_json(bad_near));
}

TEST_CASE("upsample schedule parses") {
    json doc = {{"train", {{"upsample", json::array({json::array(
                               {500, json::array({64, 64, 64})})})}}}};
    config::RunConfig cfg = config::from_json(doc);
    REQUIRE(cfg.train.upsample_schedule.size() == 1);
    CHECK(cfg.train.upsample_schedule[0].first == 500);
    CHECK(cfg.train.upsample_schedule[0].second == std::array<int, 3>{64, 64, 64});
}

TEST_CASE("config hash is stable and sensitive") {
    config::RunConfig a = config::from_json(json::object());
    config::RunConfig b = config::from_json(json::object());
    CHECK(config::config_hash(a) == config::config_hash(b));

    json doc = {{"seed", 123}};
    config::RunConfig c = config::from_json(doc);
    CHECK(config::config_hash(a) != config::config_hash(c));
}

TEST_CASE("cp factorization and relu activation parse") {
    json doc = {{"model", {{"factorization", "cp"}, {"density_activation", "relu"}}}};
    config::RunConfig cfg = config::from_json(doc);
    CHECK(cfg.model.factorization == grid::Factorization::CP);
    CHECK(cfg.model.density_activation == grid::DensityActivation::Relu);
}
