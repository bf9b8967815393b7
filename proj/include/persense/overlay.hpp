#pragma once

#include "persense/pipeline.hpp"
#include "persense/synthworld.hpp"

#include <string>
#include <utility>
#include <vector>

namespace persense {

/// Scores clamped to [0, 1] and scaled to [0, 255].
GrayImage render_similarity(const SimilarityField& sim);

void draw_cross(GrayImage& image, Point p, int arm, std::uint8_t value);
void draw_box(GrayImage& image, const BoundingBox& box, std::uint8_t value);

/// Targets at 200, other classes at 120, background 40.
GrayImage scene_preview(const SceneSpec& scene);

/// Merged ground-truth target masks at 255.
GrayImage ground_truth_image(const SceneSpec& scene);

/// The six audit panels of a run, named for their file stems: similarity,
/// initial DM, IDM candidates, selected prompts with boxes, final DM and
/// final masks.
std::vector<std::pair<std::string, GrayImage>> stage_panels(const RunOutput& run);

}  // namespace persense
