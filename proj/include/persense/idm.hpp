#pragma once

#include "persense/imgproc.hpp"
#include "persense/raster.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace persense {

/// Contour-area distribution summary. `t_comp` = mu + 2 sigma with the
/// population standard deviation.
struct ContourStats {
    double mu = 0.0;
    double sigma = 0.0;
    double t_comp = 0.0;
    std::size_t n = 0;
};

enum class PromptSource { parent, child };

std::string_view to_string(PromptSource source);
PromptSource prompt_source_from_string(std::string_view text);

/// Candidate point prompt emitted by instance detection.
struct CandidatePrompt {
    int x = 0;
    int y = 0;
    PromptSource source = PromptSource::parent;
    double parent_area = 0.0;
    bool operator==(const CandidatePrompt&) const = default;
};

struct IdmOptions {
    int threshold = 30;
    /// Keep the centroid of a composite contour alongside its children.
    bool emit_composite_parents = true;
};

/// Everything instance detection produces, kept for audit output.
struct IdmResult {
    GrayImage gray;
    BinaryImage eroded;
    std::vector<Contour> contours;
    std::optional<ContourStats> stats;
    std::vector<std::size_t> composite_indices;
    std::vector<std::vector<Contour>> children;  // parallel to composite_indices
    std::vector<CandidatePrompt> candidates;
};

/// Throws Error("no contours") on an empty list.
ContourStats contour_stats(std::span<const double> areas);

/// 1 - Phi((T_comp - mu) / sigma); defined as 0 when sigma == 0.
double composite_probability(const ContourStats& stats);

/// Splits a composite contour by thresholding its own distance transform at
/// half the maximum (strictly greater) and returning the 8-connected pieces.
std::vector<Contour> split_composite(const Contour& contour, const BinaryImage& binary);

/// Pixel prompt for a contour: its rounded moment centroid, moved to the
/// nearest member pixel when the centroid falls outside the contour.
Point contour_prompt_point(const Contour& contour);

IdmResult idm_detect(const DensityMap& dm, const IdmOptions& options = {});

/// Parents first (contour order), then children grouped per composite.
std::vector<CandidatePrompt> idm_run(const DensityMap& dm, const IdmOptions& options = {});

}  // namespace persense
