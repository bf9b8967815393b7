#include <doctest.h>

#include "persense/cli.hpp"

#include <filesystem>

using namespace persense;
using namespace persense::cli;

namespace {

std::string error_of(const Json& j) {
    try {
        config_from_json(j);
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = config_from_json(Json::parse(R"({
        "scenes": {"suite": "uniform", "base_seed": 7, "count": 3},
        "pipeline": {"T": 40, "m": 2},
        "providers": {"mask_noise": 0.0},
        "matching": "hungarian",
        "thresholds": {"min_miou": 0.5},
        "jobs": 2
    })"));
    CHECK(cfg.scenes.suite == "uniform");
    CHECK(cfg.scenes.base_seed == 7);
    CHECK(cfg.pipeline.threshold == 40);
    CHECK(cfg.pipeline.m == 2);
    CHECK(cfg.matching == Matching::hungarian);
    CHECK(cfg.thresholds.min_miou == 0.5);
    CHECK_FALSE(cfg.thresholds.min_f1.has_value());
    CHECK(cfg.jobs == 2);

    const auto cases = build_cases(cfg);
    REQUIRE(cases.size() == 3);
    for (const auto& c : cases) CHECK(c.providers.mask_noise == 0.0);
}

TEST_CASE("config errors name the field") {
    CHECK(error_of(Json{{"pipeline", {{"kk", 1}}}}).find("pipeline.kk") != std::string::npos);
    CHECK(error_of(Json{{"scenes", {{"suite", "nope"}}}}).find("scenes.suite") != std::string::npos);
    CHECK(error_of(Json{{"thresholds", {{"min_miou", 1.5}}}}).find("thresholds.min_miou") != std::string::npos);
    CHECK(error_of(Json{{"jobs", 0}}).find("jobs") != std::string::npos);
    CHECK(error_of(Json{{"matching", "best"}}).find("matching") != std::string::npos);
    CHECK(error_of(Json{{"colour", "blue"}}).find("colour") != std::string::npos);
    CHECK(error_of(Json{{"scenes", {{"generator", Json::object()}}}}).find("scenes.seeds") != std::string::npos);
    CHECK_FALSE(error_of(Json::array()).empty());
}

TEST_CASE("generator scenes") {
    const auto cfg = config_from_json(Json::parse(R"({
        "scenes": {"generator": {"n_objects": 9, "scale_cv": 0.2}, "seeds": [5, 6]}
    })"));
    const auto cases = build_cases(cfg);
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].id == "seed-5");
    CHECK(cases[1].scene->objects.size() == 9);
}

TEST_CASE("fingerprint tracks every field") {
    const RunConfig base;
    const auto fp = config_fingerprint(base);
    CHECK(fp.size() == 64);
    CHECK(config_fingerprint(base) == fp);

    auto changed = [&](auto mutate) {
        RunConfig c;
        mutate(c);
        return config_fingerprint(c) != fp;
    };
    CHECK(changed([](RunConfig& c) { c.scenes.count = 49; }));
    CHECK(changed([](RunConfig& c) { c.scenes.base_seed = 1; }));
    CHECK(changed([](RunConfig& c) { c.pipeline.k = 1.5; }));
    CHECK(changed([](RunConfig& c) { c.pipeline.m = 5; }));
    CHECK(changed([](RunConfig& c) { c.pipeline.threshold = 31; }));
    CHECK(changed([](RunConfig& c) { c.pipeline.feedback_iterations = 2; }));
    CHECK(changed([](RunConfig& c) { c.pipeline.use_ppsm = false; }));
    CHECK(changed([](RunConfig& c) { c.matching = Matching::hungarian; }));
    CHECK(changed([](RunConfig& c) { c.thresholds.min_recall = 0.1; }));
    CHECK(changed([](RunConfig& c) { c.provider_overrides = Json{{"recall", 0.9}}; }));
    CHECK_FALSE(changed([](RunConfig& c) { c.jobs = 8; }));

    const auto round = config_from_json(config_to_json(base));
    CHECK(config_fingerprint(round) == fp);
}

TEST_CASE("unmet thresholds") {
    EvalReport r;
    r.miou = 0.6;
    r.precision = 0.9;
    r.recall = 0.4;
    r.f1 = 0.55;
    Thresholds t;
    CHECK(unmet_thresholds(r, t).empty());
    t.min_miou = 0.5;
    t.min_recall = 0.5;
    const auto unmet = unmet_thresholds(r, t);
    REQUIRE(unmet.size() == 1);
    CHECK(unmet[0].rfind("recall", 0) == 0);
}

TEST_CASE("scene directories") {
    const auto dir = std::filesystem::temp_directory_path() / "persense_unit_scenes";
    std::filesystem::remove_all(dir);
    const RunConfig cfg;
    CHECK_THROWS_AS(load_cases(dir, cfg), IoError);
    const auto suite = standard_suite(1000, 2);
    write_text(dir / "b.json", scene_to_json(*suite[0].scene).dump());
    write_text(dir / "a.json", scene_to_json(*suite[1].scene).dump());
    const auto cases = load_cases(dir, cfg);
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].id == "a");
    CHECK(cases[0].scene->objects.size() == suite[1].scene->objects.size());
    write_text(dir / "c.json", "{not json");
    CHECK_THROWS_AS(load_cases(dir, cfg), IoError);
    CHECK_THROWS_AS(read_text(dir / "missing.txt"), IoError);
}
