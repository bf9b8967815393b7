#pragma once

#include "persense/idm.hpp"
#include "persense/ppsm.hpp"
#include "persense/synthworld.hpp"

#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace persense {

enum class CountMode { idm_candidates, dm_integral };

std::string_view to_string(CountMode mode);
CountMode count_mode_from_string(std::string_view text);

struct PipelineConfig {
    int threshold = 30;
    double k = std::numbers::sqrt2;
    int m = 4;
    int feedback_iterations = 1;
    bool emit_composite_parents = true;
    CountMode count_mode = CountMode::idm_candidates;
    /// Off: every IDM candidate is decoded (the ablation baseline).
    bool use_ppsm = true;
    ProviderConfig providers;
};

void validate(const PipelineConfig& cfg);

/// Non-owning bundle of the five provider seams.
struct Providers {
    const DensityMapGenerator& dmg;
    const SimilarityProvider& similarity;
    const GroundingDetector& grounding;
    const MaskDecoder& decoder;
    const ClassLabelExtractor& label_extractor;
};

/// Owns synthetic providers bound to one scene.
class SyntheticProviders {
public:
    SyntheticProviders(std::shared_ptr<const SceneSpec> scene, const ProviderConfig& cfg);
    Providers view() const { return {dmg_, sim_, grounding_, decoder_, cle_}; }

private:
    SyntheticDensityMapGenerator dmg_;
    SyntheticSimilarityProvider sim_;
    SyntheticGroundingDetector grounding_;
    SyntheticMaskDecoder decoder_;
    SyntheticLabelExtractor cle_;
};

struct StageTimings {
    double dm_ms = 0.0;
    double idm_ms = 0.0;
    double ppsm_ms = 0.0;
    double decode_ms = 0.0;
    double total() const { return dm_ms + idm_ms + ppsm_ms + decode_ms; }
};

struct PassArtifacts {
    std::vector<Exemplar> exemplars;
    DensityMap dm;
    double dm_count = 0.0;
    IdmResult idm;
    std::size_t c = 0;  // object count handed to PPSM
    std::optional<PpsmResult> ppsm;
};

struct SegmentationResult {
    std::vector<SelectedPrompt> prompts;
    std::vector<Mask> masks;  // masks[i] decoded from prompts[i]
    Mask merged_mask;
    PassArtifacts artifacts;
    StageTimings timings;
};

struct RunOutput {
    std::string label;
    std::string grounding_prompt;
    std::vector<BoundingBox> boxes;
    SimilarityField similarity;
    Exemplar initial_exemplar;
    double setup_ms = 0.0;
    SegmentationResult initial;
    std::vector<SegmentationResult> feedback;  // one per iteration

    const SegmentationResult& final_result() const { return feedback.empty() ? initial : feedback.back(); }
    double total_ms() const;
};

/// B_max is the most confident box (ties: smaller y0, then smaller x0); the
/// similarity argmax inside it is decoded and its mask's tight box returned.
Exemplar select_initial_exemplar(const SimilarityField& sim, std::span<const BoundingBox> boxes,
                                 const MaskDecoder& decoder);

/// Boxes of the top min(m, n) masks by score (ties: larger area, then index).
std::vector<Exemplar> feedback_select_exemplars(std::span<const Mask> masks, int m);

/// One DM -> IDM -> PPSM -> decode pass.
SegmentationResult run_pass(std::span<const Exemplar> exemplars, std::span<const BoundingBox> boxes,
                            const SimilarityField& sim, const Providers& providers, const PipelineConfig& cfg);

RunOutput run_persense(const SupportSample& support, const Providers& providers, const PipelineConfig& cfg);

}  // namespace persense
