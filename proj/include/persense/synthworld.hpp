#pragma once

#include "persense/raster.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace persense {

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

struct SceneObject {
    int id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double rx = 0.0;
    double ry = 0.0;
    double angle = 0.0;  // radians
    std::string label;
    BinaryImage mask;
    BoundingBox box;  // tight box of `mask`

    /// Geometric-mean radius.
    double radius() const { return std::sqrt(rx * ry); }
    /// sqrt of the tight-box area; the same measure exemplars use.
    double scale() const { return std::sqrt(box.area()); }
};

struct SceneSpec {
    int width = 0;
    int height = 0;
    std::uint64_t seed = 0;
    std::string support_label;
    double achieved_scale_cv = 0.0;
    std::vector<SceneObject> objects;

    std::size_t count_label(const std::string& label) const;
};

/// Generator knobs. `scale_cv` is the coefficient of variation of radii
/// inside each scale group; `large_fraction` of the target objects are drawn
/// around `large_scale_ratio` times the base radius.
struct SceneParams {
    std::uint64_t seed = 1;
    int n_objects = 7;
    double scale_cv = 0.0;
    double overlap_fraction = 0.0;
    int width = 512;
    int height = 512;
    double mean_radius = 10.0;
    double min_radius = 4.0;
    double aspect_jitter = 0.0;
    std::string label = "potato";
    int n_distractors = 0;
    std::string distractor_label = "onion";
    double large_scale_ratio = 1.0;
    double large_fraction = 0.0;
    int max_attempts = 4000;
};

/// Deterministic for a given seed. Centers are pixel-aligned.
SceneSpec generate_scene(const SceneParams& params);
SceneSpec generate_scene(std::uint64_t seed, int n_objects, double scale_cv, double overlap_fraction);

/// Builds a scene from explicit objects (masks are rasterized here).
SceneSpec make_scene(int width, int height, std::uint64_t seed, std::string support_label,
                     std::vector<SceneObject> objects);

BinaryImage rasterize_ellipse(int width, int height, double cx, double cy, double rx, double ry, double angle);

/// Population coefficient of variation.
double coefficient_of_variation(std::span<const double> values);

// ---------------------------------------------------------------------------
// Provider interfaces (the seams real models would plug into)
// ---------------------------------------------------------------------------

struct Exemplar {
    BoundingBox box;
    double scale = 0.0;  // sqrt(box area)
};

Exemplar make_exemplar(const BoundingBox& box);

struct DensityEstimate {
    DensityMap map;
    double count = 0.0;  // provider's object-count estimate
};

struct SupportSample {
    GrayImage image;
    BinaryImage mask;
    std::string label;  // metadata read by the synthetic label extractor
};

class DensityMapGenerator {
public:
    virtual ~DensityMapGenerator() = default;
    virtual DensityEstimate generate(std::span<const Exemplar> exemplars) const = 0;
};

class SimilarityProvider {
public:
    virtual ~SimilarityProvider() = default;
    virtual SimilarityField similarity(const SupportSample& support) const = 0;
};

class GroundingDetector {
public:
    virtual ~GroundingDetector() = default;
    /// Boxes at or above the detector's confidence threshold.
    virtual std::vector<BoundingBox> detect(const std::string& prompt) const = 0;
};

class MaskDecoder {
public:
    virtual ~MaskDecoder() = default;
    virtual Mask decode(Point point) const = 0;
};

class ClassLabelExtractor {
public:
    virtual ~ClassLabelExtractor() = default;
    virtual std::string extract(const GrayImage& masked_support) const = 0;
};

/// Prefixes "all" to a class label for the grounding detector.
std::string grounding_prompt(const std::string& label);

// ---------------------------------------------------------------------------
// Synthetic providers
// ---------------------------------------------------------------------------

struct ProviderConfig {
    double blob_sigma_factor = 0.35;
    double scale_tolerance = 0.3;  // tau of the scale-affinity model
    double sim_noise = 0.02;
    double box_jitter = 1.0;
    double grounding_threshold = 0.15;
    double recall = 1.0;
    double confidence_min = 0.3;
    double confidence_max = 0.95;
    double mask_noise = 0.3;           // probability of a 1 px boundary perturbation
    double distractor_response = 0.5;  // DMG gain on objects of another class
};

void validate(const ProviderConfig& cfg);

/// exp(-(ln(object/exemplar))^2 / (2 tau^2)).
double scale_affinity(double object_scale, double exemplar_scale, double tau);

/// Per-object visibility weights: max affinity over exemplars, scaled by the
/// distractor response for objects whose class differs from the exemplars'.
std::vector<double> density_weights(const SceneSpec& scene, std::span<const Exemplar> exemplars,
                                    const ProviderConfig& cfg);

/// Sum over objects of max-over-exemplars affinity (class ignored).
double exemplar_coverage(const SceneSpec& scene, std::span<const Exemplar> exemplars, double tau);

/// Gaussian blob per object with peak w_i and sigma = blob_sigma_factor *
/// radius, truncated at 3 sigma. `count` is the sum of weights.
DensityEstimate synth_density(const SceneSpec& scene, std::span<const Exemplar> exemplars,
                              const ProviderConfig& cfg);
SimilarityField synth_similarity(const SceneSpec& scene, const std::string& support_label,
                                 const ProviderConfig& cfg);
std::vector<BoundingBox> synth_groundings(const SceneSpec& scene, const std::string& label,
                                          const ProviderConfig& cfg);
Mask synth_decode(Point point, const SceneSpec& scene, const ProviderConfig& cfg);

/// Label stored with the support sample; throws when missing.
std::string extract_class_label(const SupportSample& support);

/// Single-instance support image and mask for `label`, taken from the first
/// matching object of the scene.
SupportSample make_support(const SceneSpec& scene, const std::string& label);

class SyntheticDensityMapGenerator final : public DensityMapGenerator {
public:
    SyntheticDensityMapGenerator(std::shared_ptr<const SceneSpec> scene, ProviderConfig cfg)
        : scene_(std::move(scene)), cfg_(cfg) {}
    DensityEstimate generate(std::span<const Exemplar> exemplars) const override;

private:
    std::shared_ptr<const SceneSpec> scene_;
    ProviderConfig cfg_;
};

class SyntheticSimilarityProvider final : public SimilarityProvider {
public:
    SyntheticSimilarityProvider(std::shared_ptr<const SceneSpec> scene, ProviderConfig cfg)
        : scene_(std::move(scene)), cfg_(cfg) {}
    SimilarityField similarity(const SupportSample& support) const override;

private:
    std::shared_ptr<const SceneSpec> scene_;
    ProviderConfig cfg_;
};

class SyntheticGroundingDetector final : public GroundingDetector {
public:
    SyntheticGroundingDetector(std::shared_ptr<const SceneSpec> scene, ProviderConfig cfg)
        : scene_(std::move(scene)), cfg_(cfg) {}
    std::vector<BoundingBox> detect(const std::string& prompt) const override;

private:
    std::shared_ptr<const SceneSpec> scene_;
    ProviderConfig cfg_;
};

class SyntheticMaskDecoder final : public MaskDecoder {
public:
    SyntheticMaskDecoder(std::shared_ptr<const SceneSpec> scene, ProviderConfig cfg)
        : scene_(std::move(scene)), cfg_(cfg) {}
    Mask decode(Point point) const override;

private:
    std::shared_ptr<const SceneSpec> scene_;
    ProviderConfig cfg_;
};

class SyntheticLabelExtractor final : public ClassLabelExtractor {
public:
    explicit SyntheticLabelExtractor(std::string label) : label_(std::move(label)) {}
    std::string extract(const GrayImage& masked_support) const override;

private:
    std::string label_;
};

}  // namespace persense
