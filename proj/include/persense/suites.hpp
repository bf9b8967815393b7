#pragma once

#include "persense/synthworld.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace persense {

/// One scene of an evaluation suite together with the provider settings it
/// is meant to be run with.
struct SuiteCase {
    std::string id;
    std::shared_ptr<const SceneSpec> scene;
    ProviderConfig providers;
};

/// 50 scenes by default: 7 to 100 targets (all three density bins), scale CV
/// 0.1 to 0.3, some overlapping pairs, distractors in every fourth scene.
std::vector<SuiteCase> standard_suite(std::uint64_t base_seed = 1000, int n_scenes = 50);

/// Two scale groups with a 3:1 radius ratio and moderate spread inside each
/// group. Uses a wider scale tolerance so the off-scale group is partly
/// visible to a single exemplar.
std::vector<SuiteCase> two_scale_suite(std::uint64_t base_seed = 2000, int n_scenes = 20);

/// Identical, well separated disks; 7 to 100 per scene.
std::vector<SuiteCase> uniform_blob_suite(std::uint64_t base_seed = 3000, int n_scenes = 50);

/// Centre distance of the merged pair, in units of the density blob sigma.
inline constexpr double kMergedPairSpacing = 4.45;

/// Singleton disks plus one pair close enough that their density blobs merge
/// into a single contour. The pair occupies objects 0 and 1.
SceneSpec merged_pair_scene(std::uint64_t seed, int n_singletons = 9, double radius = 14.0,
                            double spacing = kMergedPairSpacing, double blob_sigma_factor = 0.35);
std::vector<SuiteCase> merged_pair_suite(std::uint64_t base_seed = 4000, int n_scenes = 20);

/// Suite by name: standard, two_scale, uniform, merged_pair.
std::vector<SuiteCase> named_suite(const std::string& name, std::uint64_t base_seed, int n_scenes);
std::vector<std::string> suite_names();

}  // namespace persense
