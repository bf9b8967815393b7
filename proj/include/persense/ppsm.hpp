#pragma once

#include "persense/idm.hpp"
#include "persense/raster.hpp"

#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace persense {

/// Density-adaptive similarity cutoff. With a single object the cutoff is
/// replaced by argmax-only selection.
struct AdaptiveThreshold {
    bool argmax_only = false;
    double value = 0.0;
};

struct SelectedPrompt {
    int x = 0;
    int y = 0;
    double score = 0.0;
    /// Index of the first grounded box that admitted the prompt, or -1 when
    /// no gating was applied.
    int gate_box = -1;
    bool operator==(const SelectedPrompt&) const = default;
};

struct PpsmResult {
    std::vector<SelectedPrompt> selected;
    double s_max = 0.0;
    AdaptiveThreshold threshold;
    std::vector<std::string> warnings;
};

/// s_max * k / c for c > 1; argmax-only for c == 1; throws for c == 0.
AdaptiveThreshold adaptive_threshold(double s_max, std::size_t c, double k = std::numbers::sqrt2);

/// 1 - Phi((t_adapt - mu) / sigma); throws when sigma <= 0.
double exceed_probability(double t_adapt, double mu, double sigma);

/// Keeps candidates whose similarity strictly exceeds the adaptive threshold
/// and that fall inside at least one box (edges inclusive).
PpsmResult ppsm_select(std::span<const CandidatePrompt> candidates, const SimilarityField& sim,
                       std::span<const BoundingBox> boxes, std::size_t c, double k = std::numbers::sqrt2);

/// ppsm_select without diagnostics; warnings go to the log.
std::vector<SelectedPrompt> ppsm_filter(std::span<const CandidatePrompt> candidates, const SimilarityField& sim,
                                        std::span<const BoundingBox> boxes, std::size_t c,
                                        double k = std::numbers::sqrt2);

}  // namespace persense
