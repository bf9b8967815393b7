#include "persense/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace persense {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Runs `fn`, prefixing any error with the stage name.
template <typename Fn>
auto staged(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const RasterIoError&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(std::string(stage) + ": " + e.what());
    }
}

}  // namespace

std::string_view to_string(CountMode mode) {
    return mode == CountMode::idm_candidates ? "idm_candidates" : "dm_integral";
}

CountMode count_mode_from_string(std::string_view text) {
    if (text == "idm_candidates") return CountMode::idm_candidates;
    if (text == "dm_integral") return CountMode::dm_integral;
    throw Error("unknown count_mode '" + std::string(text) + "'");
}

void validate(const PipelineConfig& cfg) {
    if (cfg.threshold < 0 || cfg.threshold > 255) throw Error("pipeline config: T must lie in [0,255]");
    if (!(cfg.k > 0.0) || !std::isfinite(cfg.k)) throw Error("pipeline config: k must be positive");
    if (cfg.m < 1) throw Error("pipeline config: m must be at least 1");
    if (cfg.feedback_iterations < 0) throw Error("pipeline config: feedback_iterations must be non-negative");
    validate(cfg.providers);
}

SyntheticProviders::SyntheticProviders(std::shared_ptr<const SceneSpec> scene, const ProviderConfig& cfg)
    : dmg_(scene, cfg),
      sim_(scene, cfg),
      grounding_(scene, cfg),
      decoder_(scene, cfg),
      cle_(scene->support_label) {}

double RunOutput::total_ms() const {
    double t = setup_ms + initial.timings.total();
    for (const auto& pass : feedback) t += pass.timings.total();
    return t;
}

Exemplar select_initial_exemplar(const SimilarityField& sim, std::span<const BoundingBox> boxes,
                                 const MaskDecoder& decoder) {
    if (boxes.empty()) throw Error("grounding failed");
    const BoundingBox* best = &boxes.front();
    for (const auto& box : boxes) {
        validate(box, sim.width(), sim.height());
        if (box.confidence > best->confidence ||
            (box.confidence == best->confidence &&
             (box.y0 < best->y0 || (box.y0 == best->y0 && box.x0 < best->x0))))
            best = &box;
    }
    Point p_max{best->x0, best->y0};
    double s_max = sim(p_max.x, p_max.y);
    for (int y = best->y0; y <= best->y1; ++y) {
        for (int x = best->x0; x <= best->x1; ++x) {
            if (sim(x, y) > s_max) {
                s_max = sim(x, y);
                p_max = {x, y};
            }
        }
    }
    const Mask mask = decoder.decode(p_max);
    if (foreground_count(mask.bits) == 0) throw Error("decoder returned an empty mask for the initial exemplar");
    return make_exemplar(tight_box(mask.bits));
}

std::vector<Exemplar> feedback_select_exemplars(std::span<const Mask> masks, int m) {
    if (masks.empty()) throw Error("feedback needs at least one mask");
    if (m < 1) throw Error("m must be at least 1");
    std::vector<std::size_t> order(masks.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> areas(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) areas[i] = foreground_count(masks[i].bits);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (masks[a].score != masks[b].score) return masks[a].score > masks[b].score;
        return areas[a] > areas[b];
    });
    std::vector<Exemplar> out;
    for (std::size_t i = 0; i < order.size() && out.size() < static_cast<std::size_t>(m); ++i) {
        if (areas[order[i]] == 0) continue;
        out.push_back(make_exemplar(tight_box(masks[order[i]].bits)));
    }
    return out;
}

SegmentationResult run_pass(std::span<const Exemplar> exemplars, std::span<const BoundingBox> boxes,
                            const SimilarityField& sim, const Providers& providers, const PipelineConfig& cfg) {
    SegmentationResult result;
    auto& art = result.artifacts;
    art.exemplars.assign(exemplars.begin(), exemplars.end());

    auto t0 = Clock::now();
    auto estimate = staged("density map", [&] { return providers.dmg.generate(exemplars); });
    if (!estimate.map.same_shape(sim)) throw Error("density map: shape differs from the similarity field");
    art.dm = std::move(estimate.map);
    art.dm_count = estimate.count;
    result.timings.dm_ms = ms_since(t0);

    t0 = Clock::now();
    art.idm = staged("instance detection", [&] {
        return idm_detect(art.dm, IdmOptions{cfg.threshold, cfg.emit_composite_parents});
    });
    const auto& candidates = art.idm.candidates;
    art.c = cfg.count_mode == CountMode::idm_candidates
                ? candidates.size()
                : static_cast<std::size_t>(std::max(1L, std::lround(art.dm_count)));
    result.timings.idm_ms = ms_since(t0);

    t0 = Clock::now();
    if (candidates.empty()) {
        // Nothing to select from.
    } else if (cfg.use_ppsm) {
        art.ppsm = staged("prompt selection", [&] { return ppsm_select(candidates, sim, boxes, art.c, cfg.k); });
        result.prompts = art.ppsm->selected;
    } else {
        for (const auto& cand : candidates) result.prompts.push_back({cand.x, cand.y, sim(cand.x, cand.y), -1});
    }
    result.timings.ppsm_ms = ms_since(t0);

    t0 = Clock::now();
    result.masks = staged("mask decoding", [&] {
        std::vector<Mask> masks;
        masks.reserve(result.prompts.size());
        for (const auto& p : result.prompts) masks.push_back(providers.decoder.decode({p.x, p.y}));
        return masks;
    });
    result.merged_mask = {merge_masks(result.masks, sim.width(), sim.height()), 1.0};
    result.timings.decode_ms = ms_since(t0);
    return result;
}

RunOutput run_persense(const SupportSample& support, const Providers& providers, const PipelineConfig& cfg) {
    validate(cfg);
    RunOutput out;
    const auto t0 = Clock::now();
    out.label = staged("class label extraction", [&] {
        return providers.label_extractor.extract(mask_apply(support.image, support.mask));
    });
    out.grounding_prompt = grounding_prompt(out.label);
    out.boxes = staged("grounding", [&] { return providers.grounding.detect(out.grounding_prompt); });
    if (out.boxes.empty()) throw Error("grounding failed");
    out.similarity = staged("similarity", [&] { return providers.similarity.similarity(support); });
    out.initial_exemplar = staged("initial exemplar", [&] {
        return select_initial_exemplar(out.similarity, out.boxes, providers.decoder);
    });
    out.setup_ms = ms_since(t0);

    const Exemplar initial[] = {out.initial_exemplar};
    out.initial = run_pass(initial, out.boxes, out.similarity, providers, cfg);

    const SegmentationResult* previous = &out.initial;
    for (int it = 0; it < cfg.feedback_iterations; ++it) {
        // The initial exemplar stays in the set so coverage cannot shrink.
        std::vector<Exemplar> exemplars{out.initial_exemplar};
        if (!previous->masks.empty()) {
            const auto top = feedback_select_exemplars(previous->masks, cfg.m);
            exemplars.insert(exemplars.end(), top.begin(), top.end());
        }
        out.feedback.push_back(run_pass(exemplars, out.boxes, out.similarity, providers, cfg));
        previous = &out.feedback.back();
    }
    return out;
}

}  // namespace persense
