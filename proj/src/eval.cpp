#include "persense/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace persense {

namespace {

struct Indexed {
    const BinaryImage* bits;
    BoundingBox box;
    bool empty;
};

Indexed index_mask(const Mask& m) {
    const bool empty = foreground_count(m.bits) == 0;
    return {&m.bits, empty ? BoundingBox{} : tight_box(m.bits), empty};
}

double iou_in_boxes(const Indexed& a, const Indexed& b) {
    if (a.empty || b.empty) return 0.0;
    const int x0 = std::max(a.box.x0, b.box.x0);
    const int y0 = std::max(a.box.y0, b.box.y0);
    const int x1 = std::min(a.box.x1, b.box.x1);
    const int y1 = std::min(a.box.y1, b.box.y1);
    if (x1 < x0 || y1 < y0) return 0.0;
    std::size_t inter = 0;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) inter += (*a.bits)(x, y) & (*b.bits)(x, y);
    if (inter == 0) return 0.0;
    const double uni = static_cast<double>(foreground_count(*a.bits) + foreground_count(*b.bits) - inter);
    return static_cast<double>(inter) / uni;
}

/// Maximum-weight assignment on a square matrix (Kuhn-Munkres, O(n^3)).
std::vector<int> hungarian_max(const std::vector<std::vector<double>>& w) {
    const std::size_t n = w.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0);
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    return row_to_col;
}

double mean(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

DensityBin density_bin(std::size_t count) {
    if (count <= 30) return DensityBin::low;
    if (count <= 60) return DensityBin::medium;
    return DensityBin::high;
}

std::string_view to_string(DensityBin bin) {
    switch (bin) {
        case DensityBin::low: return "Low";
        case DensityBin::medium: return "Medium";
        case DensityBin::high: return "High";
    }
    return "?";
}

std::string_view to_string(Matching matching) {
    return matching == Matching::greedy ? "greedy" : "hungarian";
}

Matching matching_from_string(std::string_view text) {
    if (text == "greedy") return Matching::greedy;
    if (text == "hungarian") return Matching::hungarian;
    throw Error("unknown matching '" + std::string(text) + "'");
}

double mask_iou(const BinaryImage& a, const BinaryImage& b) {
    if (!a.same_shape(b)) throw Error("mask_iou: mask dimensions differ");
    std::size_t inter = 0;
    std::size_t uni = 0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        inter += va[i] & vb[i];
        uni += va[i] | vb[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double miou(std::span<const Mask> pred, std::span<const Mask> gt, Matching matching) {
    if (pred.empty() && gt.empty()) return 1.0;
    const BinaryImage* ref = !pred.empty() ? &pred.front().bits : &gt.front().bits;
    for (const auto& m : pred)
        if (!m.bits.same_shape(*ref)) throw Error("miou: mask dimensions differ");
    for (const auto& m : gt)
        if (!m.bits.same_shape(*ref)) throw Error("miou: mask dimensions differ");
    if (pred.empty() || gt.empty()) return 0.0;

    std::vector<Indexed> pi;
    std::vector<Indexed> gi;
    for (const auto& m : pred) pi.push_back(index_mask(m));
    for (const auto& m : gt) gi.push_back(index_mask(m));

    struct Pair {
        double iou;
        std::size_t p;
        std::size_t g;
    };
    std::vector<Pair> pairs;
    for (std::size_t p = 0; p < pi.size(); ++p)
        for (std::size_t g = 0; g < gi.size(); ++g)
            if (const double v = iou_in_boxes(pi[p], gi[g]); v > 0.0) pairs.push_back({v, p, g});

    double total = 0.0;
    if (matching == Matching::greedy) {
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.iou != b.iou) return a.iou > b.iou;
            if (a.p != b.p) return a.p < b.p;
            return a.g < b.g;
        });
        std::vector<bool> pu(pi.size(), false);
        std::vector<bool> gu(gi.size(), false);
        for (const auto& pr : pairs) {
            if (pu[pr.p] || gu[pr.g]) continue;
            pu[pr.p] = gu[pr.g] = true;
            total += pr.iou;
        }
    } else {
        const std::size_t n = std::max(pi.size(), gi.size());
        std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
        for (const auto& pr : pairs) w[pr.p][pr.g] = pr.iou;
        const auto assign = hungarian_max(w);
        for (std::size_t r = 0; r < n; ++r)
            if (assign[r] >= 0) total += w[r][static_cast<std::size_t>(assign[r])];
    }
    return total / static_cast<double>(std::max(pi.size(), gi.size()));
}

std::vector<Mask> target_masks(const SceneSpec& scene) {
    std::vector<Mask> out;
    for (const auto& obj : scene.objects)
        if (obj.label == scene.support_label) out.push_back({obj.mask, 1.0});
    return out;
}

Prf prompt_prf(std::span<const SelectedPrompt> prompts, const SceneSpec& scene) {
    std::vector<const SceneObject*> targets;
    for (const auto& obj : scene.objects)
        if (obj.label == scene.support_label) targets.push_back(&obj);
    std::vector<bool> claimed(targets.size(), false);
    std::size_t tp = 0;
    for (const auto& p : prompts) {
        std::ptrdiff_t pick = -1;
        double best = 0.0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto& obj = *targets[i];
            if (claimed[i] || !obj.mask.contains(p.x, p.y) || !obj.mask(p.x, p.y)) continue;
            const double d = std::hypot(p.x - obj.cx, p.y - obj.cy);
            if (pick < 0 || d < best) {
                pick = static_cast<std::ptrdiff_t>(i);
                best = d;
            }
        }
        if (pick >= 0) {
            claimed[static_cast<std::size_t>(pick)] = true;
            ++tp;
        }
    }
    Prf r;
    r.precision = prompts.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(prompts.size());
    r.recall = targets.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(targets.size());
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

SceneRow evaluate_scene(const std::string& id, const SceneSpec& scene, std::span<const SelectedPrompt> prompts,
                        std::span<const Mask> masks, Matching matching) {
    SceneRow row;
    row.id = id;
    row.n_objects = scene.count_label(scene.support_label);
    row.bin = density_bin(row.n_objects);
    const auto gt = target_masks(scene);
    row.miou = miou(masks, gt, matching);
    const auto prf = prompt_prf(prompts, scene);
    row.precision = prf.precision;
    row.recall = prf.recall;
    row.f1 = prf.f1;
    row.n_prompts = prompts.size();
    return row;
}

EvalReport aggregate(std::vector<SceneRow> rows, std::string fingerprint) {
    std::sort(rows.begin(), rows.end(), [](const SceneRow& a, const SceneRow& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].id == rows[i - 1].id) throw Error("duplicate scene id '" + rows[i].id + "'");

    EvalReport report;
    auto summarize = [](const std::vector<const SceneRow*>& sel, double& miou_out, double& p, double& r, double& f) {
        std::vector<double> a, b, c, d;
        for (const auto* row : sel) {
            a.push_back(row->miou);
            b.push_back(row->precision);
            c.push_back(row->recall);
            d.push_back(row->f1);
        }
        miou_out = mean(a);
        p = mean(b);
        r = mean(c);
        f = mean(d);
    };
    std::vector<const SceneRow*> all;
    for (const auto& row : rows) all.push_back(&row);
    summarize(all, report.miou, report.precision, report.recall, report.f1);
    for (DensityBin bin : {DensityBin::low, DensityBin::medium, DensityBin::high}) {
        std::vector<const SceneRow*> sel;
        for (const auto& row : rows)
            if (row.bin == bin) sel.push_back(&row);
        BinRow br;
        br.bin = bin;
        br.scenes = sel.size();
        summarize(sel, br.miou, br.precision, br.recall, br.f1);
        report.bins.push_back(br);
    }
    report.rows = std::move(rows);
    report.fingerprint = std::move(fingerprint);
    return report;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %7s %8s %9s %8s %8s\n", "bin", "scenes", "mIoU", "precision", "recall",
                  "f1");
    out << line;
    for (const auto& b : report.bins) {
        std::snprintf(line, sizeof line, "%-12s %7zu %8.4f %9.4f %8.4f %8.4f\n", std::string(to_string(b.bin)).c_str(),
                      b.scenes, b.miou, b.precision, b.recall, b.f1);
        out << line;
    }
    std::snprintf(line, sizeof line, "%-12s %7zu %8.4f %9.4f %8.4f %8.4f\n", "all", report.rows.size(), report.miou,
                  report.precision, report.recall, report.f1);
    out << line;
    return out.str();
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "id,n_objects,bin,miou,precision,recall,f1,n_prompts\n";
    for (const auto& r : report.rows) {
        out << r.id << ',' << r.n_objects << ',' << to_string(r.bin) << ',' << fmt(r.miou) << ','
            << fmt(r.precision) << ',' << fmt(r.recall) << ',' << fmt(r.f1) << ',' << r.n_prompts << '\n';
    }
    return out.str();
}

}  // namespace persense
