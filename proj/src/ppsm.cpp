#include "persense/ppsm.hpp"

#include "persense/imgproc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace persense {

AdaptiveThreshold adaptive_threshold(double s_max, std::size_t c, double k) {
    if (c == 0) throw Error("no objects");
    if (!std::isfinite(s_max)) throw Error("adaptive_threshold: s_max must be finite");
    if (!(k > 0.0)) throw Error("adaptive_threshold: k must be positive");
    if (c == 1) return {true, s_max};
    return {false, s_max / (static_cast<double>(c) / k)};
}

double exceed_probability(double t_adapt, double mu, double sigma) {
    if (!(sigma > 0.0)) throw Error("exceed_probability: sigma must be positive");
    return 1.0 - std_normal_cdf((t_adapt - mu) / sigma);
}

PpsmResult ppsm_select(std::span<const CandidatePrompt> candidates, const SimilarityField& sim,
                       std::span<const BoundingBox> boxes, std::size_t c, double k) {
    for (const auto& cand : candidates) {
        if (!sim.contains(cand.x, cand.y)) throw Error("ppsm: candidate outside the similarity field");
    }
    PpsmResult result;
    result.s_max = *std::max_element(sim.values().begin(), sim.values().end());
    result.threshold = adaptive_threshold(result.s_max, c, k);

    if (boxes.empty()) {
        result.warnings.emplace_back("no grounded boxes: box gate admits nothing");
        return result;
    }

    auto first_box = [&](const CandidatePrompt& cand) -> int {
        for (std::size_t b = 0; b < boxes.size(); ++b)
            if (boxes[b].contains(cand.x, cand.y)) return static_cast<int>(b);
        return -1;
    };

    if (result.threshold.argmax_only) {
        const CandidatePrompt* best = nullptr;
        int best_box = -1;
        for (const auto& cand : candidates) {
            const int box = first_box(cand);
            if (box < 0) continue;
            if (!best || sim(cand.x, cand.y) > sim(best->x, best->y)) {
                best = &cand;
                best_box = box;
            }
        }
        if (best) result.selected.push_back({best->x, best->y, sim(best->x, best->y), best_box});
        return result;
    }

    std::set<std::pair<int, int>> seen;
    for (const auto& cand : candidates) {
        const double score = sim(cand.x, cand.y);
        if (!(score > result.threshold.value)) continue;
        const int box = first_box(cand);
        if (box < 0) continue;
        if (!seen.insert({cand.x, cand.y}).second) continue;
        result.selected.push_back({cand.x, cand.y, score, box});
    }
    return result;
}

std::vector<SelectedPrompt> ppsm_filter(std::span<const CandidatePrompt> candidates, const SimilarityField& sim,
                                        std::span<const BoundingBox> boxes, std::size_t c, double k) {
    auto result = ppsm_select(candidates, sim, boxes, c, k);
    for (const auto& w : result.warnings) spdlog::warn("ppsm: {}", w);
    return std::move(result.selected);
}

}  // namespace persense
