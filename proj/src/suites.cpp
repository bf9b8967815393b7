#include "persense/suites.hpp"

#include "persense/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace persense {

namespace {

std::string case_id(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03d", prefix, index);
    return buf;
}

}  // namespace

std::vector<SuiteCase> standard_suite(std::uint64_t base_seed, int n_scenes) {
    std::vector<SuiteCase> cases;
    for (int i = 0; i < n_scenes; ++i) {
        SceneParams p;
        p.seed = base_seed + static_cast<std::uint64_t>(i);
        p.n_objects = n_scenes > 1 ? 7 + (93 * i) / (n_scenes - 1) : 7;
        p.scale_cv = 0.1 + 0.05 * (i % 5);
        p.overlap_fraction = 0.1 * (i % 3);
        p.n_distractors = i % 4 == 0 ? std::max(2, p.n_objects / 5) : 0;
        p.mean_radius = 9.0;
        p.aspect_jitter = 0.15;
        cases.push_back({case_id("std", i), std::make_shared<const SceneSpec>(generate_scene(p)), ProviderConfig{}});
    }
    return cases;
}

std::vector<SuiteCase> two_scale_suite(std::uint64_t base_seed, int n_scenes) {
    std::vector<SuiteCase> cases;
    for (int i = 0; i < n_scenes; ++i) {
        SceneParams p;
        p.seed = base_seed + static_cast<std::uint64_t>(i);
        p.n_objects = 12 + 2 * (i % 7);
        p.scale_cv = 0.15;
        p.mean_radius = 7.0;
        p.large_scale_ratio = 3.0;
        p.large_fraction = 0.5;
        ProviderConfig providers;
        providers.scale_tolerance = 0.5;
        cases.push_back({case_id("two", i), std::make_shared<const SceneSpec>(generate_scene(p)), providers});
    }
    return cases;
}

std::vector<SuiteCase> uniform_blob_suite(std::uint64_t base_seed, int n_scenes) {
    std::vector<SuiteCase> cases;
    for (int i = 0; i < n_scenes; ++i) {
        SceneParams p;
        p.seed = base_seed + static_cast<std::uint64_t>(i);
        p.n_objects = n_scenes > 1 ? 7 + (93 * i) / (n_scenes - 1) : 7;
        p.mean_radius = 8.0;
        cases.push_back({case_id("uni", i), std::make_shared<const SceneSpec>(generate_scene(p)), ProviderConfig{}});
    }
    return cases;
}

SceneSpec merged_pair_scene(std::uint64_t seed, int n_singletons, double radius, double spacing,
                            double blob_sigma_factor) {
    if (n_singletons < 1) throw Error("merged_pair_scene: need at least one singleton");
    constexpr int kSize = 512;
    CounterRng rng(seed, "merged-pair");
    const double d = spacing * blob_sigma_factor * radius;
    const double reach = 1.1 * radius + 2.0;

    std::vector<SceneObject> objects;
    auto add = [&](double x, double y) {
        SceneObject o;
        o.cx = x;
        o.cy = y;
        o.rx = radius;
        o.ry = radius;
        o.label = "potato";
        objects.push_back(std::move(o));
    };

    // Pair near the middle; singletons on a jittered grid away from it.
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double mx = kSize / 2.0;
    const double my = kSize / 2.0;
    add(std::round(mx - 0.5 * d * std::cos(theta)), std::round(my - 0.5 * d * std::sin(theta)));
    add(std::round(mx + 0.5 * d * std::cos(theta)), std::round(my + 0.5 * d * std::sin(theta)));

    const int cols = 5;
    const double cell = kSize / static_cast<double>(cols);
    std::vector<std::pair<int, int>> slots;
    for (int r = 0; r < cols; ++r)
        for (int c = 0; c < cols; ++c)
            if (!(r == cols / 2 && c == cols / 2)) slots.emplace_back(c, r);
    if (n_singletons > static_cast<int>(slots.size())) throw Error("merged_pair_scene: too many singletons");
    for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng.next() % i]);

    const double slack = std::max(0.0, 0.5 * cell - reach);
    for (int i = 0; i < n_singletons; ++i) {
        const auto [c, r] = slots[static_cast<std::size_t>(i)];
        const double x = (c + 0.5) * cell + rng.uniform(-slack, slack);
        const double y = (r + 0.5) * cell + rng.uniform(-slack, slack);
        add(std::round(x), std::round(y));
    }
    return make_scene(kSize, kSize, seed, "potato", std::move(objects));
}

std::vector<SuiteCase> merged_pair_suite(std::uint64_t base_seed, int n_scenes) {
    std::vector<SuiteCase> cases;
    for (int i = 0; i < n_scenes; ++i) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
        cases.push_back({case_id("pair", i), std::make_shared<const SceneSpec>(merged_pair_scene(seed, 9 + i % 4)),
                         ProviderConfig{}});
    }
    return cases;
}

std::vector<std::string> suite_names() {
    return {"standard", "two_scale", "uniform", "merged_pair"};
}

std::vector<SuiteCase> named_suite(const std::string& name, std::uint64_t base_seed, int n_scenes) {
    if (n_scenes < 1) throw Error("suite needs at least one scene");
    if (name == "standard") return standard_suite(base_seed, n_scenes);
    if (name == "two_scale") return two_scale_suite(base_seed, n_scenes);
    if (name == "uniform") return uniform_blob_suite(base_seed, n_scenes);
    if (name == "merged_pair") return merged_pair_suite(base_seed, n_scenes);
    throw Error("unknown suite '" + name + "'");
}

}  // namespace persense
