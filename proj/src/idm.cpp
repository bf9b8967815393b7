#include "persense/idm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace persense {

std::string_view to_string(PromptSource source) {
    return source == PromptSource::parent ? "parent" : "child";
}

PromptSource prompt_source_from_string(std::string_view text) {
    if (text == "parent") return PromptSource::parent;
    if (text == "child") return PromptSource::child;
    throw Error("unknown prompt source: " + std::string(text));
}

ContourStats contour_stats(std::span<const double> areas) {
    if (areas.empty()) throw Error("no contours");
    ContourStats stats;
    stats.n = areas.size();
    double sum = 0.0;
    for (double a : areas) sum += a;
    stats.mu = sum / static_cast<double>(stats.n);
    double sq = 0.0;
    for (double a : areas) sq += (a - stats.mu) * (a - stats.mu);
    stats.sigma = std::sqrt(sq / static_cast<double>(stats.n));
    stats.t_comp = stats.mu + 2.0 * stats.sigma;
    return stats;
}

double composite_probability(const ContourStats& stats) {
    if (stats.sigma <= 0.0) return 0.0;
    return 1.0 - std_normal_cdf((stats.t_comp - stats.mu) / stats.sigma);
}

std::vector<Contour> split_composite(const Contour& contour, const BinaryImage& binary) {
    const int w = binary.width();
    const int h = binary.height();
    const BinaryImage region = contour_mask(contour, w, h);
    const DistanceField dist = distance_transform(region);

    double peak = 0.0;
    for (const auto p : contour.pixels) peak = std::max(peak, dist[p]);
    const double cut = 0.5 * peak;

    BinaryImage cores(w, h, 0);
    for (const auto p : contour.pixels)
        if (dist[p] > cut) cores[p] = 1;
    return find_contours(cores);
}

Point contour_prompt_point(const Contour& contour) {
    const Centroid c = centroid(contour);
    const Point rounded{static_cast<int>(std::floor(c.x + 0.5)), static_cast<int>(std::floor(c.y + 0.5))};
    const bool inside = std::binary_search(
        contour.pixels.begin(), contour.pixels.end(), rounded,
        [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
    if (inside) return rounded;

    Point best = contour.pixels.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto p : contour.pixels) {
        const double d = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
        if (d < best_d) {
            best_d = d;
            best = p;
        }
    }
    return best;
}

IdmResult idm_detect(const DensityMap& dm, const IdmOptions& options) {
    IdmResult result;
    result.gray = normalize_to_gray(dm);
    result.eroded = erode3x3(threshold_binary(result.gray, options.threshold));
    result.contours = find_contours(result.eroded);
    if (result.contours.empty()) return result;

    std::vector<double> areas;
    areas.reserve(result.contours.size());
    for (const auto& c : result.contours) areas.push_back(c.area);
    result.stats = contour_stats(areas);

    for (std::size_t i = 0; i < result.contours.size(); ++i) {
        if (result.contours[i].area > result.stats->t_comp) result.composite_indices.push_back(i);
    }

    std::vector<bool> is_composite(result.contours.size(), false);
    for (auto i : result.composite_indices) is_composite[i] = true;

    for (std::size_t i = 0; i < result.contours.size(); ++i) {
        if (is_composite[i] && !options.emit_composite_parents) continue;
        const Point p = contour_prompt_point(result.contours[i]);
        result.candidates.push_back({p.x, p.y, PromptSource::parent, result.contours[i].area});
    }
    for (auto i : result.composite_indices) {
        const auto& parent = result.contours[i];
        auto children = split_composite(parent, result.eroded);
        for (const auto& child : children) {
            const Point p = contour_prompt_point(child);
            result.candidates.push_back({p.x, p.y, PromptSource::child, parent.area});
        }
        result.children.push_back(std::move(children));
    }
    return result;
}

std::vector<CandidatePrompt> idm_run(const DensityMap& dm, const IdmOptions& options) {
    return idm_detect(dm, options).candidates;
}

}  // namespace persense
