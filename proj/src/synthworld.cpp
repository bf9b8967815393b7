#include "persense/synthworld.hpp"

#include "persense/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace persense {

namespace {

constexpr double kBackgroundSimilarity = 0.05;
constexpr double kSimilarityMin = 0.6;
constexpr double kSimilarityMax = 0.95;
constexpr int kBackgroundBlobRadius = 3;

struct Placed {
    double cx;
    double cy;
    double reach;  // max(rx, ry)
};

double separation(double reach_a, double reach_b) {
    return 1.1 * (reach_a + reach_b) + 2.0;
}

/// Radii with mean `mean` and population CV `cv`, bounded below by `floor`.
std::vector<double> draw_radii(CounterRng& rng, int n, double mean, double cv, double floor) {
    std::vector<double> radii(static_cast<std::size_t>(n), mean);
    if (n <= 1 || cv <= 0.0) return radii;
    if (floor >= mean) throw Error("minimum radius must be below the mean radius");

    std::vector<double> u(radii.size());
    for (auto& v : u) v = rng.normal();
    const double mu = std::accumulate(u.begin(), u.end(), 0.0) / n;
    double var = 0.0;
    for (double v : u) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / n);
    if (sd <= 0.0) return radii;
    for (auto& v : u) v = (v - mu) / sd;

    // radius = floor + (mean - floor) * e_i / mean(e), e_i = exp(a u_i); CV is
    // then (mean - floor)/mean * CV(e), and CV(e) grows with a.
    const double wanted = cv * mean / (mean - floor);
    auto cv_of = [&](double a) {
        std::vector<double> e(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) e[i] = std::exp(a * u[i]);
        return coefficient_of_variation(e);
    };
    double lo = 0.0;
    double hi = 1.0;
    while (cv_of(hi) < wanted) {
        hi *= 2.0;
        if (hi > 64.0) throw Error("requested scale CV is not reachable with this object count");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cv_of(mid) < wanted ? lo : hi) = mid;
    }
    std::vector<double> e(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) e[i] = std::exp(hi * u[i]);
    const double emean = std::accumulate(e.begin(), e.end(), 0.0) / n;
    for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = floor + (mean - floor) * e[i] / emean;
    return radii;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    const int ix0 = std::max(a.x0, b.x0);
    const int iy0 = std::max(a.y0, b.y0);
    const int ix1 = std::min(a.x1, b.x1);
    const int iy1 = std::min(a.y1, b.y1);
    if (ix1 < ix0 || iy1 < iy0) return 0.0;
    const double inter = double(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
    return inter / (a.area() + b.area() - inter);
}

/// Label of the scene object an exemplar box most likely depicts.
std::string exemplar_label(const SceneSpec& scene, const Exemplar& exemplar) {
    double best = 0.0;
    const SceneObject* match = nullptr;
    for (const auto& obj : scene.objects) {
        const double iou = box_iou(obj.box, exemplar.box);
        if (iou > best) {
            best = iou;
            match = &obj;
        }
    }
    return match ? match->label : scene.support_label;
}

BoundingBox grow(const BoundingBox& box, int by, int width, int height) {
    return {std::max(0, box.x0 - by), std::max(0, box.y0 - by), std::min(width - 1, box.x1 + by),
            std::min(height - 1, box.y1 + by), box.confidence};
}

/// 3x3 dilation or erosion restricted to `region` (grown by one pixel).
BinaryImage morph_local(const BinaryImage& mask, const BoundingBox& region, bool dilate) {
    const BoundingBox r = grow(region, 1, mask.width(), mask.height());
    BinaryImage out = mask;
    for (int y = r.y0; y <= r.y1; ++y) {
        for (int x = r.x0; x <= r.x1; ++x) {
            std::uint8_t v = dilate ? 0 : 1;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    const std::uint8_t n = mask.contains(nx, ny) ? mask(nx, ny) : 0;
                    v = dilate ? std::max(v, n) : std::min(v, n);
                }
            }
            out(x, y) = v;
        }
    }
    return out;
}

double mask_iou_local(const BinaryImage& a, const BinaryImage& b, const BoundingBox& region) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (int y = region.y0; y <= region.y1; ++y) {
        for (int x = region.x0; x <= region.x1; ++x) {
            inter += a(x, y) & b(x, y);
            uni += a(x, y) | b(x, y);
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double normalized_radius(const SceneObject& obj, Point p) {
    const double dx = p.x - obj.cx;
    const double dy = p.y - obj.cy;
    const double c = std::cos(obj.angle);
    const double s = std::sin(obj.angle);
    const double u = (dx * c + dy * s) / obj.rx;
    const double v = (-dx * s + dy * c) / obj.ry;
    return std::sqrt(u * u + v * v);
}

std::uint64_t point_key(Point p) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.y)) << 32) |
           static_cast<std::uint32_t>(p.x);
}

}  // namespace

std::size_t SceneSpec::count_label(const std::string& label) const {
    return static_cast<std::size_t>(
        std::count_if(objects.begin(), objects.end(), [&](const SceneObject& o) { return o.label == label; }));
}

double coefficient_of_variation(std::span<const double> values) {
    if (values.empty()) return 0.0;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (mean == 0.0) return 0.0;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / n) / mean;
}

BinaryImage rasterize_ellipse(int width, int height, double cx, double cy, double rx, double ry, double angle) {
    BinaryImage mask(width, height, 0);
    const double reach = std::max(rx, ry);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + reach)));
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double u = (dx * c + dy * s) / rx;
            const double v = (-dx * s + dy * c) / ry;
            if (u * u + v * v <= 1.0) mask(x, y) = 1;
        }
    }
    return mask;
}

SceneSpec make_scene(int width, int height, std::uint64_t seed, std::string support_label,
                     std::vector<SceneObject> objects) {
    SceneSpec scene;
    scene.width = width;
    scene.height = height;
    scene.seed = seed;
    scene.support_label = std::move(support_label);
    std::vector<double> radii;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        auto& obj = objects[i];
        obj.id = static_cast<int>(i);
        obj.mask = rasterize_ellipse(width, height, obj.cx, obj.cy, obj.rx, obj.ry, obj.angle);
        if (foreground_count(obj.mask) == 0) throw Error("scene object " + std::to_string(i) + " has an empty mask");
        obj.box = tight_box(obj.mask);
        if (obj.label == scene.support_label) radii.push_back(obj.radius());
    }
    scene.achieved_scale_cv = coefficient_of_variation(radii);
    scene.objects = std::move(objects);
    return scene;
}

SceneSpec generate_scene(std::uint64_t seed, int n_objects, double scale_cv, double overlap_fraction) {
    SceneParams params;
    params.seed = seed;
    params.n_objects = n_objects;
    params.scale_cv = scale_cv;
    params.overlap_fraction = overlap_fraction;
    return generate_scene(params);
}

SceneSpec generate_scene(const SceneParams& p) {
    if (p.n_objects < 1) throw Error("n_objects must be at least 1");
    if (p.scale_cv < 0.0) throw Error("scale_cv must be non-negative");
    if (p.overlap_fraction < 0.0 || p.overlap_fraction >= 1.0) throw Error("overlap_fraction must lie in [0,1)");
    if (p.large_fraction < 0.0 || p.large_fraction > 1.0) throw Error("large_fraction must lie in [0,1]");
    if (p.n_distractors < 0) throw Error("n_distractors must be non-negative");
    if (p.label.empty()) throw Error("scene label must not be empty");

    CounterRng rng(p.seed, "scene");
    const int n_large = static_cast<int>(std::lround(p.n_objects * p.large_fraction));
    const int n_base = p.n_objects - n_large;

    struct Draft {
        double rx, ry, angle;
        std::string label;
        bool overlapping;
    };
    std::vector<Draft> drafts;
    auto add_group = [&](int count, double mean, const std::string& label) {
        const auto radii = draw_radii(rng, count, mean, p.scale_cv, std::min(p.min_radius, 0.5 * mean));
        for (double r : radii) {
            const double aspect = p.aspect_jitter > 0.0 ? std::exp(p.aspect_jitter * rng.normal()) : 1.0;
            const double angle = p.aspect_jitter > 0.0 ? rng.uniform(0.0, std::numbers::pi) : 0.0;
            drafts.push_back({r * std::sqrt(aspect), r / std::sqrt(aspect), angle, label, false});
        }
    };
    add_group(n_base, p.mean_radius, p.label);
    add_group(n_large, p.mean_radius * p.large_scale_ratio, p.label);
    add_group(p.n_distractors, p.mean_radius, p.distractor_label);

    const int n_overlap = static_cast<int>(std::floor(p.overlap_fraction * p.n_objects));
    // The last target objects of the base group become overlap partners.
    for (int i = 0; i < n_overlap && i < n_base - 1; ++i) drafts[static_cast<std::size_t>(n_base - 1 - i)].overlapping = true;

    // Large objects first so they find room.
    std::vector<std::size_t> order(drafts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (drafts[a].overlapping != drafts[b].overlapping) return !drafts[a].overlapping;
        return std::max(drafts[a].rx, drafts[a].ry) > std::max(drafts[b].rx, drafts[b].ry);
    });

    std::vector<Placed> placed(drafts.size(), Placed{-1.0, -1.0, 0.0});
    std::vector<bool> done(drafts.size(), false);
    std::vector<bool> partnered(drafts.size(), false);

    auto fits = [&](std::size_t self, double cx, double cy, double reach, std::ptrdiff_t partner) {
        const double margin = std::ceil(1.1 * reach) + 2.0;
        if (cx < margin || cy < margin || cx > p.width - 1 - margin || cy > p.height - 1 - margin) return false;
        for (std::size_t j = 0; j < drafts.size(); ++j) {
            if (!done[j] || j == self || static_cast<std::ptrdiff_t>(j) == partner) continue;
            const double d = std::hypot(cx - placed[j].cx, cy - placed[j].cy);
            if (d < separation(reach, placed[j].reach)) return false;
        }
        return true;
    };

    for (std::size_t idx : order) {
        const auto& draft = drafts[idx];
        const double reach = std::max(draft.rx, draft.ry);
        bool ok = false;
        for (int attempt = 0; attempt < p.max_attempts && !ok; ++attempt) {
            double cx = 0.0;
            double cy = 0.0;
            std::ptrdiff_t partner = -1;
            if (draft.overlapping) {
                std::vector<std::size_t> pool;
                for (std::size_t j = 0; j < drafts.size(); ++j)
                    if (done[j] && !drafts[j].overlapping && !partnered[j] && drafts[j].label == draft.label)
                        pool.push_back(j);
                if (pool.empty()) break;
                partner = static_cast<std::ptrdiff_t>(pool[rng.next() % pool.size()]);
                const auto& other = placed[static_cast<std::size_t>(partner)];
                const double dist = rng.uniform(0.6, 0.9) * (reach + other.reach);
                const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
                cx = std::round(other.cx + dist * std::cos(theta));
                cy = std::round(other.cy + dist * std::sin(theta));
            } else {
                cx = rng.uniform_int(0, p.width - 1);
                cy = rng.uniform_int(0, p.height - 1);
            }
            if (fits(idx, cx, cy, reach, partner)) {
                placed[idx] = {cx, cy, reach};
                done[idx] = true;
                if (partner >= 0) partnered[static_cast<std::size_t>(partner)] = true;
                ok = true;
            }
        }
        if (!ok)
            throw Error("could not place " + std::to_string(drafts.size()) + " objects in a " +
                        std::to_string(p.width) + "x" + std::to_string(p.height) +
                        " scene; try fewer objects or smaller radii");
    }

    std::vector<SceneObject> objects;
    objects.reserve(drafts.size());
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        SceneObject obj;
        obj.cx = placed[i].cx;
        obj.cy = placed[i].cy;
        obj.rx = drafts[i].rx;
        obj.ry = drafts[i].ry;
        obj.angle = drafts[i].angle;
        obj.label = drafts[i].label;
        objects.push_back(std::move(obj));
    }
    auto scene = make_scene(p.width, p.height, p.seed, p.label, std::move(objects));
    // CV is reported over the base group, the one scale_cv was requested for.
    std::vector<double> radii;
    for (int i = 0; i < n_base; ++i) radii.push_back(scene.objects[static_cast<std::size_t>(i)].radius());
    scene.achieved_scale_cv = coefficient_of_variation(radii);
    return scene;
}

Exemplar make_exemplar(const BoundingBox& box) {
    return {box, std::sqrt(box.area())};
}

std::string grounding_prompt(const std::string& label) {
    if (label.empty()) throw Error("empty class label");
    return "all " + label;
}

void validate(const ProviderConfig& cfg) {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(std::string("provider config: ") + name + " must be non-negative");
    };
    nonneg(cfg.blob_sigma_factor, "blob_sigma_factor");
    nonneg(cfg.scale_tolerance, "scale_tolerance");
    nonneg(cfg.sim_noise, "sim_noise");
    nonneg(cfg.box_jitter, "box_jitter");
    nonneg(cfg.mask_noise, "mask_noise");
    nonneg(cfg.distractor_response, "distractor_response");
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string("provider config: ") + name + " must lie in [0,1]");
    };
    unit(cfg.grounding_threshold, "grounding_threshold");
    unit(cfg.recall, "recall");
    unit(cfg.confidence_min, "confidence_min");
    unit(cfg.confidence_max, "confidence_max");
    unit(cfg.mask_noise, "mask_noise");
    if (cfg.confidence_min > cfg.confidence_max) throw Error("provider config: confidence_min exceeds confidence_max");
    if (cfg.blob_sigma_factor <= 0.0) throw Error("provider config: blob_sigma_factor must be positive");
    if (cfg.scale_tolerance <= 0.0) throw Error("provider config: scale_tolerance must be positive");
}

double scale_affinity(double object_scale, double exemplar_scale, double tau) {
    const double l = std::log(object_scale / exemplar_scale);
    return std::exp(-(l * l) / (2.0 * tau * tau));
}

std::vector<double> density_weights(const SceneSpec& scene, std::span<const Exemplar> exemplars,
                                    const ProviderConfig& cfg) {
    if (exemplars.empty()) throw Error("density map generation needs at least one exemplar");
    std::vector<std::string> classes;
    for (const auto& e : exemplars) classes.push_back(exemplar_label(scene, e));
    std::vector<double> weights;
    weights.reserve(scene.objects.size());
    for (const auto& obj : scene.objects) {
        double w = 0.0;
        for (std::size_t e = 0; e < exemplars.size(); ++e) {
            const double gain = obj.label == classes[e] ? 1.0 : cfg.distractor_response;
            w = std::max(w, gain * scale_affinity(obj.scale(), exemplars[e].scale, cfg.scale_tolerance));
        }
        weights.push_back(w);
    }
    return weights;
}

double exemplar_coverage(const SceneSpec& scene, std::span<const Exemplar> exemplars, double tau) {
    double total = 0.0;
    for (const auto& obj : scene.objects) {
        double best = 0.0;
        for (const auto& e : exemplars) best = std::max(best, scale_affinity(obj.scale(), e.scale, tau));
        total += best;
    }
    return total;
}

DensityEstimate synth_density(const SceneSpec& scene, std::span<const Exemplar> exemplars,
                              const ProviderConfig& cfg) {
    const auto weights = density_weights(scene, exemplars, cfg);
    DensityEstimate est{DensityMap(scene.width, scene.height, 0.0), 0.0};
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& obj = scene.objects[i];
        const double w = weights[i];
        est.count += w;
        if (w <= 0.0) continue;
        const double sigma = cfg.blob_sigma_factor * obj.radius();
        const double cutoff = 3.0 * sigma;
        const int reach = static_cast<int>(std::ceil(cutoff));
        const int ccx = static_cast<int>(std::lround(obj.cx));
        const int ccy = static_cast<int>(std::lround(obj.cy));
        for (int y = std::max(0, ccy - reach); y <= std::min(scene.height - 1, ccy + reach); ++y) {
            for (int x = std::max(0, ccx - reach); x <= std::min(scene.width - 1, ccx + reach); ++x) {
                const double d2 = (x - obj.cx) * (x - obj.cx) + (y - obj.cy) * (y - obj.cy);
                if (d2 > cutoff * cutoff) continue;
                est.map(x, y) += w * std::exp(-d2 / (2.0 * sigma * sigma));
            }
        }
    }
    return est;
}

SimilarityField synth_similarity(const SceneSpec& scene, const std::string& support_label,
                                 const ProviderConfig& cfg) {
    SimilarityField field(scene.width, scene.height, kBackgroundSimilarity);
    for (const auto& obj : scene.objects) {
        if (obj.label != support_label) continue;
        CounterRng rng(scene.seed, "sim-base", static_cast<std::uint64_t>(obj.id));
        const double base = rng.uniform(kSimilarityMin, kSimilarityMax);
        for (int y = obj.box.y0; y <= obj.box.y1; ++y)
            for (int x = obj.box.x0; x <= obj.box.x1; ++x)
                if (obj.mask(x, y)) field(x, y) = std::max(field(x, y), base);
    }
    if (cfg.sim_noise > 0.0) {
        CounterRng noise(scene.seed, "sim-noise");
        for (auto& v : field.values()) v += cfg.sim_noise * noise.normal();
    }
    return field;
}

std::vector<BoundingBox> synth_groundings(const SceneSpec& scene, const std::string& label,
                                          const ProviderConfig& cfg) {
    std::vector<BoundingBox> boxes;
    for (const auto& obj : scene.objects) {
        if (obj.label != label) continue;
        CounterRng rng(scene.seed, "grounding", static_cast<std::uint64_t>(obj.id));
        const bool detected = rng.uniform() < cfg.recall;
        const double confidence = rng.uniform(cfg.confidence_min, cfg.confidence_max);
        auto jitter = [&]() { return static_cast<int>(std::lround(rng.uniform(-cfg.box_jitter, cfg.box_jitter))); };
        BoundingBox box = obj.box;
        box.x0 = std::clamp(box.x0 + jitter(), 0, scene.width - 1);
        box.y0 = std::clamp(box.y0 + jitter(), 0, scene.height - 1);
        box.x1 = std::clamp(box.x1 + jitter(), box.x0, scene.width - 1);
        box.y1 = std::clamp(box.y1 + jitter(), box.y0, scene.height - 1);
        box.confidence = confidence;
        if (detected && confidence >= cfg.grounding_threshold) boxes.push_back(box);
    }
    return boxes;
}

Mask synth_decode(Point point, const SceneSpec& scene, const ProviderConfig& cfg) {
    if (point.x < 0 || point.y < 0 || point.x >= scene.width || point.y >= scene.height)
        throw Error("decode point outside the image");

    const SceneObject* hit = nullptr;
    double hit_rho = 0.0;
    for (const auto& obj : scene.objects) {
        if (!obj.mask[point]) continue;
        const double rho = normalized_radius(obj, point);
        if (!hit || rho < hit_rho) {
            hit = &obj;
            hit_rho = rho;
        }
    }

    CounterRng rng(scene.seed, "decode", point_key(point));
    if (!hit) {
        Mask blob{rasterize_ellipse(scene.width, scene.height, point.x, point.y, kBackgroundBlobRadius,
                                    kBackgroundBlobRadius, 0.0),
                  0.0};
        blob.score = rng.uniform(0.05, 0.2);
        return blob;
    }

    Mask mask{hit->mask, 0.0};
    const double u = rng.uniform();
    if (u < 0.5 * cfg.mask_noise) {
        mask.bits = morph_local(hit->mask, hit->box, true);
    } else if (u < cfg.mask_noise) {
        auto eroded = morph_local(hit->mask, hit->box, false);
        if (foreground_count(eroded) > 0) mask.bits = std::move(eroded);
    }
    const double iou = mask_iou_local(mask.bits, hit->mask, grow(hit->box, 1, scene.width, scene.height));
    const double rho = std::min(1.0, hit_rho);
    mask.score = std::clamp(iou * (1.0 - 0.3 * rho * rho), 0.0, 1.0);
    return mask;
}

std::string extract_class_label(const SupportSample& support) {
    if (support.label.empty()) throw Error("support sample carries no class label");
    return support.label;
}

SupportSample make_support(const SceneSpec& scene, const std::string& label) {
    const auto it = std::find_if(scene.objects.begin(), scene.objects.end(),
                                 [&](const SceneObject& o) { return o.label == label; });
    if (it == scene.objects.end()) throw Error("scene has no object labelled '" + label + "'");
    const double reach = std::max(it->rx, it->ry);
    const int side = 2 * static_cast<int>(std::ceil(reach)) + 9;
    const double c = 0.5 * (side - 1);
    SupportSample support;
    support.mask = rasterize_ellipse(side, side, c, c, it->rx, it->ry, it->angle);
    support.image = GrayImage(side, side, 40);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            if (support.mask(x, y)) support.image(x, y) = 200;
    support.label = label;
    return support;
}

DensityEstimate SyntheticDensityMapGenerator::generate(std::span<const Exemplar> exemplars) const {
    return synth_density(*scene_, exemplars, cfg_);
}

SimilarityField SyntheticSimilarityProvider::similarity(const SupportSample& support) const {
    return synth_similarity(*scene_, support.label, cfg_);
}

std::vector<BoundingBox> SyntheticGroundingDetector::detect(const std::string& prompt) const {
    std::string label = prompt;
    if (label.rfind("all ", 0) == 0) label = label.substr(4);
    return synth_groundings(*scene_, label, cfg_);
}

Mask SyntheticMaskDecoder::decode(Point point) const {
    return synth_decode(point, *scene_, cfg_);
}

std::string SyntheticLabelExtractor::extract(const GrayImage&) const {
    if (label_.empty()) throw Error("class label metadata missing");
    return label_;
}

}  // namespace persense
