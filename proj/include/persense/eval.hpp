#pragma once

#include "persense/ppsm.hpp"
#include "persense/raster.hpp"
#include "persense/synthworld.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace persense {

enum class DensityBin { low, medium, high };

/// Low: count <= 30; Medium: 30 < count <= 60; High: count > 60.
DensityBin density_bin(std::size_t count);
std::string_view to_string(DensityBin bin);

enum class Matching { greedy, hungarian };

std::string_view to_string(Matching matching);
Matching matching_from_string(std::string_view text);

/// Throws on a shape mismatch. Two empty masks have IoU 0.
double mask_iou(const BinaryImage& a, const BinaryImage& b);

/// One-to-one matching of predictions to ground truth; the matched IoUs are
/// summed and divided by max(|pred|, |gt|). Empty against empty is 1.
double miou(std::span<const Mask> pred, std::span<const Mask> gt, Matching matching = Matching::greedy);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// A prompt is a hit when it lies in a target mask nobody has claimed yet;
/// among several such masks the one with the nearest centre is claimed.
/// Targets are the scene objects carrying the support label.
Prf prompt_prf(std::span<const SelectedPrompt> prompts, const SceneSpec& scene);

/// Ground-truth masks of the target objects.
std::vector<Mask> target_masks(const SceneSpec& scene);

struct SceneRow {
    std::string id;
    std::size_t n_objects = 0;
    DensityBin bin = DensityBin::low;
    double miou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t n_prompts = 0;
};

struct BinRow {
    DensityBin bin = DensityBin::low;
    std::size_t scenes = 0;
    double miou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    double miou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<BinRow> bins;  // always low, medium, high
    std::vector<SceneRow> rows;  // sorted by id
    std::string fingerprint;
};

SceneRow evaluate_scene(const std::string& id, const SceneSpec& scene, std::span<const SelectedPrompt> prompts,
                        std::span<const Mask> masks, Matching matching = Matching::greedy);

/// Macro averages over scenes. Row order does not affect the result.
EvalReport aggregate(std::vector<SceneRow> rows, std::string fingerprint = {});

std::string report_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace persense
