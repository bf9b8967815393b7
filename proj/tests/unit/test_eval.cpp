#include <doctest.h>

#include "oracles.hpp"
#include "persense/eval.hpp"

#include <algorithm>
#include <numeric>

using namespace persense;

namespace {

Mask rect(int w, int h, int x0, int y0, int x1, int y1) {
    BinaryImage bits(w, h, 0);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) bits(x, y) = 1;
    return {bits, 1.0};
}

SceneSpec disks(std::initializer_list<std::pair<double, double>> centres, double r = 6.0,
                const std::string& label = "cell") {
    std::vector<SceneObject> objs;
    for (auto [cx, cy] : centres) {
        SceneObject o;
        o.cx = cx;
        o.cy = cy;
        o.rx = o.ry = r;
        o.label = label;
        objs.push_back(o);
    }
    return make_scene(100, 100, 1, "cell", std::move(objs));
}

std::vector<Mask> random_masks(CounterRng& rng, int n) {
    std::vector<Mask> out;
    for (int i = 0; i < n; ++i) {
        const int x0 = rng.uniform_int(0, 25);
        const int y0 = rng.uniform_int(0, 25);
        out.push_back(rect(32, 32, x0, y0, rng.uniform_int(x0, 31), rng.uniform_int(y0, 31)));
    }
    return out;
}

}  // namespace

TEST_CASE("mask_iou") {
    const auto a = rect(10, 10, 0, 0, 3, 3);
    const auto b = rect(10, 10, 2, 0, 5, 3);
    CHECK(mask_iou(a.bits, a.bits) == 1.0);
    CHECK(mask_iou(a.bits, b.bits) == doctest::Approx(8.0 / 24.0));
    CHECK(mask_iou(BinaryImage(4, 4, 0), BinaryImage(4, 4, 0)) == 0.0);
    CHECK_THROWS_AS(mask_iou(a.bits, BinaryImage(5, 5, 0)), Error);
}

TEST_CASE("miou basics") {
    const std::vector<Mask> gt{rect(20, 20, 0, 0, 3, 3), rect(20, 20, 10, 10, 13, 13)};
    CHECK(miou(gt, gt) == 1.0);
    CHECK(miou({}, {}) == 1.0);
    CHECK(miou(gt, {}) == 0.0);
    CHECK(miou({}, gt) == 0.0);
    const std::vector<Mask> half{rect(20, 20, 0, 0, 3, 3)};
    CHECK(miou(half, gt) == 0.5);
    const std::vector<Mask> extra{gt[0], gt[1], rect(20, 20, 16, 16, 19, 19)};
    CHECK(miou(extra, gt) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("greedy matching can lose to the optimal assignment") {
    // p0 takes g0 first (7/13), leaving p1 (5/10 on g0) unmatched.
    const std::vector<Mask> gt{rect(30, 10, 0, 0, 9, 9), rect(30, 10, 10, 0, 19, 9)};
    const std::vector<Mask> pred{rect(30, 10, 3, 0, 12, 9), rect(30, 10, 0, 0, 4, 9)};
    CHECK(miou(pred, gt, Matching::greedy) == doctest::Approx(7.0 / 13.0 / 2.0));
    CHECK(miou(pred, gt, Matching::hungarian) == doctest::Approx((3.0 / 17.0 + 0.5) / 2.0));
}

TEST_CASE("miou properties") {
    CounterRng rng(51, "miou-props");
    for (int t = 0; t < 200; ++t) {
        const auto a = random_masks(rng, rng.uniform_int(0, 6));
        const auto b = random_masks(rng, rng.uniform_int(0, 6));
        for (auto m : {Matching::greedy, Matching::hungarian}) {
            const double ab = miou(a, b, m);
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
            CHECK(ab == doctest::Approx(miou(b, a, m)).epsilon(1e-12));
            if (!a.empty()) CHECK(miou(a, a, m) == 1.0);
        }
        CHECK(miou(a, b, Matching::hungarian) >= miou(a, b, Matching::greedy) - 1e-12);

        // Brute force over assignments for small cases.
        if (a.size() <= 4 && b.size() <= 4 && !a.empty() && !b.empty()) {
            std::vector<std::size_t> perm(std::max(a.size(), b.size()));
            std::iota(perm.begin(), perm.end(), 0);
            double best = 0.0;
            do {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i)
                    if (perm[i] < b.size()) s += mask_iou(a[i].bits, b[perm[i]].bits);
                best = std::max(best, s);
            } while (std::next_permutation(perm.begin(), perm.end()));
            CHECK(miou(a, b, Matching::hungarian) ==
                  doctest::Approx(best / static_cast<double>(std::max(a.size(), b.size()))).epsilon(1e-12));
        }
    }
}

TEST_CASE("prompt_prf") {
    const auto scene = disks({{20, 20}, {60, 60}});
    SUBCASE("two prompts in one object") {
        const std::vector<SelectedPrompt> p{{20, 20}, {21, 20}};
        const auto r = prompt_prf(p, scene);
        CHECK(r.precision == 0.5);
        CHECK(r.recall == 0.5);
        CHECK(r.f1 == 0.5);
    }
    SUBCASE("perfect") {
        const std::vector<SelectedPrompt> p{{20, 20}, {60, 60}};
        const auto r = prompt_prf(p, scene);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
    }
    SUBCASE("no prompts") {
        const auto r = prompt_prf({}, scene);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 0.0);
        CHECK(r.f1 == 0.0);
    }
    SUBCASE("distractors are not targets") {
        std::vector<SceneObject> objs(2);
        objs[0].cx = objs[0].cy = 20;
        objs[0].rx = objs[0].ry = 6;
        objs[0].label = "cell";
        objs[1].cx = objs[1].cy = 60;
        objs[1].rx = objs[1].ry = 6;
        objs[1].label = "dust";
        const auto mixed = make_scene(100, 100, 1, "cell", std::move(objs));
        const std::vector<SelectedPrompt> p{{60, 60}};
        CHECK(prompt_prf(p, mixed).precision == 0.0);
        CHECK(target_masks(mixed).size() == 1);
    }
    SUBCASE("a prompt in an overlap claims the nearer centre") {
        const auto pair = disks({{40, 40}, {48, 40}});
        const std::vector<SelectedPrompt> p{{45, 40}, {41, 40}};
        const auto r = prompt_prf(p, pair);
        CHECK(r.recall == 1.0);
    }
}

TEST_CASE("recall never drops when prompts are added") {
    CounterRng rng(52, "recall-mono");
    const auto scene = disks({{15, 15}, {45, 15}, {75, 15}, {15, 60}, {45, 60}, {75, 60}}, 9.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<SelectedPrompt> p;
        double prev = 0.0;
        for (int i = 0; i < 10; ++i) {
            p.push_back({rng.uniform_int(0, 99), rng.uniform_int(0, 99)});
            const double r = prompt_prf(p, scene).recall;
            CHECK(r >= prev);
            prev = r;
        }
    }
}

TEST_CASE("density bins") {
    CHECK(density_bin(0) == DensityBin::low);
    CHECK(density_bin(30) == DensityBin::low);
    CHECK(density_bin(31) == DensityBin::medium);
    CHECK(density_bin(60) == DensityBin::medium);
    CHECK(density_bin(61) == DensityBin::high);
    CHECK(to_string(DensityBin::medium) == "Medium");
    CHECK(matching_from_string("hungarian") == Matching::hungarian);
    CHECK_THROWS_AS(matching_from_string("best"), Error);
}

TEST_CASE("aggregate") {
    std::vector<SceneRow> rows;
    CounterRng rng(53, "aggregate");
    for (int i = 0; i < 30; ++i) {
        SceneRow r;
        r.id = "s" + std::to_string(100 + i);
        r.n_objects = static_cast<std::size_t>(rng.uniform_int(1, 100));
        r.bin = density_bin(r.n_objects);
        r.miou = rng.uniform();
        r.precision = rng.uniform();
        r.recall = rng.uniform();
        r.f1 = rng.uniform();
        rows.push_back(r);
    }
    const auto a = aggregate(rows, "fp");
    auto shuffled = rows;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto b = aggregate(shuffled, "fp");
    CHECK(a.miou == b.miou);
    CHECK(report_csv(a) == report_csv(b));
    CHECK(report_table(a) == report_table(b));
    CHECK(a.fingerprint == "fp");

    REQUIRE(a.bins.size() == 3);
    std::size_t total = 0;
    double weighted = 0.0;
    for (const auto& bin : a.bins) {
        total += bin.scenes;
        weighted += bin.miou * static_cast<double>(bin.scenes);
    }
    CHECK(total == rows.size());
    CHECK(weighted / rows.size() == doctest::Approx(a.miou).epsilon(1e-12));
    CHECK(std::is_sorted(a.rows.begin(), a.rows.end(),
                         [](const SceneRow& x, const SceneRow& y) { return x.id < y.id; }));

    rows.push_back(rows.front());
    CHECK_THROWS_AS(aggregate(rows), Error);
}

TEST_CASE("evaluate_scene with ground truth is perfect") {
    const auto scene = disks({{20, 20}, {60, 60}, {20, 70}});
    std::vector<SelectedPrompt> prompts;
    for (const auto& o : scene.objects) prompts.push_back({static_cast<int>(o.cx), static_cast<int>(o.cy)});
    const auto row = evaluate_scene("x", scene, prompts, target_masks(scene));
    CHECK(row.miou == 1.0);
    CHECK(row.f1 == 1.0);
    CHECK(row.n_objects == 3);
    CHECK(row.bin == DensityBin::low);
}
