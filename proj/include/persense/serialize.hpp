#pragma once

#include "persense/eval.hpp"
#include "persense/pipeline.hpp"
#include "persense/synthworld.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace persense {

using Json = nlohmann::ordered_json;

/// Row-major run lengths, alternating 0-runs and 1-runs, starting with a
/// (possibly empty) 0-run.
std::vector<std::uint32_t> rle_encode(const BinaryImage& mask);
BinaryImage rle_decode(int width, int height, const std::vector<std::uint32_t>& counts);

Json mask_to_json(const BinaryImage& mask);
BinaryImage mask_from_json(const Json& j);

Json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const Json& j);

Json scene_to_json(const SceneSpec& scene);
/// Masks stored in the file are checked against the ellipse they describe.
SceneSpec scene_from_json(const Json& j);

Json provider_config_to_json(const ProviderConfig& cfg);
Json pipeline_config_to_json(const PipelineConfig& cfg);

/// Fills `cfg` from the keys present in `j`; unknown keys and wrong types
/// raise an error naming the field.
void apply_provider_config(const Json& j, ProviderConfig& cfg, const std::string& where = "providers");
void apply_pipeline_config(const Json& j, PipelineConfig& cfg, const std::string& where = "pipeline");

/// What evaluation needs from a run: the final prompts and masks.
struct ResultRecord {
    std::string id;
    std::string variant;
    std::vector<SelectedPrompt> prompts;
    std::vector<Mask> masks;
};

Json result_to_json(const std::string& id, const std::string& variant, const RunOutput& run,
                    const SegmentationResult& final_pass, bool with_timings = true);
ResultRecord result_from_json(const Json& j);

Json report_to_json(const EvalReport& report);

/// Hex SHA-256 of `text`.
std::string sha256_hex(const std::string& text);

/// Fingerprint of a canonical JSON value (compact dump, keys in insertion
/// order as produced by the *_to_json functions).
std::string fingerprint(const Json& j);

}  // namespace persense
