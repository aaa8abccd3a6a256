#include <doctest.h>

#include "glowsign/config.hpp"
#include "glowsign/error.hpp"

using namespace glowsign;

TEST_CASE("defaults validate and round-trip canonically") {
    PipelineConfig config;
    config.dataset_dir = "data/train";
    config.eval_dataset_dir = "data/eval";
    CHECK_NOTHROW(config.validate());

    const std::string text = serialize_config(config);
    const PipelineConfig back = parse_config_text(text);
    CHECK(serialize_config(back) == text);
    CHECK(config_hash(back) == config_hash(config));
}

TEST_CASE("parse accepts comments and whitespace") {
    const PipelineConfig config = parse_config_text(
        "# a comment\n"
        "\n"
        "poison.alpha = 0.75\n"
        "  train.epochs =  9 \n"
        "fluor.powers = 40, 80 ,120\n");
    CHECK(config.alpha == doctest::Approx(0.75));
    CHECK(config.train.epochs == 9);
    REQUIRE(config.powers.size() == 3);
    CHECK(config.powers[1] == doctest::Approx(80.0));
}

TEST_CASE("unknown, duplicate, and malformed keys are rejected") {
    CHECK_THROWS_AS(parse_config_text("poison.strength = 3\n"), InvalidInputError);
    CHECK_THROWS_AS(parse_config_text("poison.alpha = 0.5\npoison.alpha = 0.6\n"),
                    InvalidInputError);
    CHECK_THROWS_AS(parse_config_text("poison.alpha 0.5\n"), InvalidInputError);
    CHECK_THROWS_AS(parse_config_text("poison.alpha = zebra\n"), InvalidInputError);
    CHECK_THROWS_AS(parse_config_text("train.epochs = 3.5\n"), InvalidInputError);
}

TEST_CASE("validation rejects out-of-range fields") {
    PipelineConfig config;
    config.alpha = 1.2;
    CHECK_THROWS_AS(config.validate(), InvalidInputError);

    config = PipelineConfig{};
    config.poison_ratio = 0.0;
    CHECK_THROWS_AS(config.validate(), InvalidInputError);

    config = PipelineConfig{};
    config.goal = "confusion";
    CHECK_THROWS_AS(config.validate(), InvalidInputError);

    config = PipelineConfig{};
    config.sweep_factor = "fog_density";
    CHECK_THROWS_AS(config.validate(), InvalidInputError);

    config = PipelineConfig{};
    config.jpeg_quality = 0;
    CHECK_THROWS_AS(config.validate(), InvalidInputError);

    config = PipelineConfig{};
    config.weathers = {"cloudy", "hail"};
    CHECK_THROWS_AS(config.validate(), InvalidInputError);
}

TEST_CASE("hash changes with any field") {
    PipelineConfig a;
    PipelineConfig b;
    CHECK(config_hash(a) == config_hash(b));
    b.train.seed = 999;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("overrides hit arbitrary fields by key") {
    PipelineConfig config;
    apply_config_override(config, "poison.goal", "hiding");
    apply_config_override(config, "defense.strip_fpr", "0.1");
    CHECK(config.goal == "hiding");
    CHECK(config.strip.entropy_threshold_fpr == doctest::Approx(0.1));
    CHECK_THROWS_AS(apply_config_override(config, "nope", "1"), InvalidInputError);
}

TEST_CASE("trigger condition grid covers the configured lists in order") {
    PipelineConfig config;
    config.powers = {40, 120};
    config.ambients = {300};
    config.uv_distances = {2, 5};
    config.weathers = {"cloudy"};
    const auto conditions = config.trigger_conditions();
    REQUIRE(conditions.size() == 4);
    CHECK(conditions[0].uv_power == 40);
    CHECK(conditions[0].uv_distance == 2);
    CHECK(conditions[1].uv_distance == 5);
    CHECK(conditions[2].uv_power == 120);
}
