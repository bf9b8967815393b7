#include "persense/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace persense {

namespace {

GrayImage masks_panel(const SegmentationResult& pass, int width, int height) {
    GrayImage out(width, height, 0);
    for (const auto& m : pass.masks) {
        const auto level = static_cast<std::uint8_t>(80 + std::lround(175.0 * std::clamp(m.score, 0.0, 1.0)));
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (m.bits(x, y)) out(x, y) = std::max(out(x, y), level);
    }
    for (const auto& p : pass.prompts) draw_cross(out, {p.x, p.y}, 3, 0);
    return out;
}

}  // namespace

GrayImage render_similarity(const SimilarityField& sim) {
    GrayImage out(sim.width(), sim.height(), 0);
    const auto src = sim.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(src[i], 0.0, 1.0)));
    return out;
}

void draw_cross(GrayImage& image, Point p, int arm, std::uint8_t value) {
    for (int d = -arm; d <= arm; ++d) {
        if (image.contains(p.x + d, p.y)) image(p.x + d, p.y) = value;
        if (image.contains(p.x, p.y + d)) image(p.x, p.y + d) = value;
    }
}

void draw_box(GrayImage& image, const BoundingBox& box, std::uint8_t value) {
    for (int x = box.x0; x <= box.x1; ++x) {
        if (image.contains(x, box.y0)) image(x, box.y0) = value;
        if (image.contains(x, box.y1)) image(x, box.y1) = value;
    }
    for (int y = box.y0; y <= box.y1; ++y) {
        if (image.contains(box.x0, y)) image(box.x0, y) = value;
        if (image.contains(box.x1, y)) image(box.x1, y) = value;
    }
}

GrayImage scene_preview(const SceneSpec& scene) {
    GrayImage out(scene.width, scene.height, 40);
    for (const auto& obj : scene.objects) {
        const std::uint8_t level = obj.label == scene.support_label ? 200 : 120;
        for (int y = obj.box.y0; y <= obj.box.y1; ++y)
            for (int x = obj.box.x0; x <= obj.box.x1; ++x)
                if (obj.mask(x, y)) out(x, y) = level;
    }
    return out;
}

GrayImage ground_truth_image(const SceneSpec& scene) {
    GrayImage out(scene.width, scene.height, 0);
    for (const auto& obj : scene.objects) {
        if (obj.label != scene.support_label) continue;
        for (int y = obj.box.y0; y <= obj.box.y1; ++y)
            for (int x = obj.box.x0; x <= obj.box.x1; ++x)
                if (obj.mask(x, y)) out(x, y) = 255;
    }
    return out;
}

std::vector<std::pair<std::string, GrayImage>> stage_panels(const RunOutput& run) {
    const int w = run.similarity.width();
    const int h = run.similarity.height();
    std::vector<std::pair<std::string, GrayImage>> panels;

    panels.emplace_back("1_similarity", render_similarity(run.similarity));

    const auto& init = run.initial.artifacts;
    auto dm = normalize_to_gray(init.dm);
    draw_box(dm, run.initial_exemplar.box, 255);
    panels.emplace_back("2_density_initial", dm);

    auto cands = normalize_to_gray(init.dm);
    for (const auto& c : init.idm.candidates) draw_cross(cands, {c.x, c.y}, 3, 255);
    panels.emplace_back("3_candidates", std::move(cands));

    auto prompts = normalize_to_gray(init.dm);
    for (const auto& b : run.boxes) draw_box(prompts, b, 160);
    for (const auto& p : run.initial.prompts) draw_cross(prompts, {p.x, p.y}, 3, 255);
    panels.emplace_back("4_prompts", std::move(prompts));

    const auto& fin = run.final_result();
    auto fdm = normalize_to_gray(fin.artifacts.dm);
    for (const auto& e : fin.artifacts.exemplars) draw_box(fdm, e.box, 255);
    panels.emplace_back("5_density_final", std::move(fdm));

    panels.emplace_back("6_masks", masks_panel(fin, w, h));
    return panels;
}

}  // namespace persense
