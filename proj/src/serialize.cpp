#include "persense/serialize.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <set>

namespace persense {

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw Error("config field '" + field + "': " + what);
}

double get_number(const Json& v, const std::string& field) {
    if (!v.is_number()) field_error(field, "expected a number");
    return v.get<double>();
}

int get_int(const Json& v, const std::string& field) {
    if (!v.is_number_integer()) field_error(field, "expected an integer");
    return v.get<int>();
}

bool get_bool(const Json& v, const std::string& field) {
    if (!v.is_boolean()) field_error(field, "expected true or false");
    return v.get<bool>();
}

std::string get_string(const Json& v, const std::string& field) {
    if (!v.is_string()) field_error(field, "expected a string");
    return v.get<std::string>();
}

const Json& require(const Json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) throw Error(std::string(what) + ": missing '" + key + "'");
    return j.at(key);
}

Json prompt_to_json(const SelectedPrompt& p) {
    return Json{{"x", p.x}, {"y", p.y}, {"score", p.score}, {"gate_box", p.gate_box}};
}

SelectedPrompt prompt_from_json(const Json& j) {
    return {require(j, "x", "prompt").get<int>(), require(j, "y", "prompt").get<int>(),
            require(j, "score", "prompt").get<double>(), j.value("gate_box", -1)};
}

Json timings_to_json(const StageTimings& t) {
    return Json{{"dm_ms", t.dm_ms}, {"idm_ms", t.idm_ms}, {"ppsm_ms", t.ppsm_ms}, {"decode_ms", t.decode_ms}};
}

Json pass_to_json(const SegmentationResult& pass, bool with_timings) {
    const auto& art = pass.artifacts;
    Json exemplars = Json::array();
    for (const auto& e : art.exemplars) exemplars.push_back(Json{{"box", box_to_json(e.box)}, {"scale", e.scale}});
    Json candidates = Json::array();
    for (const auto& c : art.idm.candidates)
        candidates.push_back(Json{{"x", c.x}, {"y", c.y}, {"source", std::string(to_string(c.source))}});
    Json j{{"exemplars", exemplars},
           {"dm_count", art.dm_count},
           {"contours", art.idm.contours.size()},
           {"composites", art.idm.composite_indices.size()},
           {"candidates", candidates},
           {"c", art.c}};
    if (art.ppsm) {
        j["ppsm"] = Json{{"s_max", art.ppsm->s_max},
                         {"argmax_only", art.ppsm->threshold.argmax_only},
                         {"threshold", art.ppsm->threshold.value},
                         {"warnings", art.ppsm->warnings}};
    }
    Json prompts = Json::array();
    for (const auto& p : pass.prompts) prompts.push_back(prompt_to_json(p));
    j["prompts"] = prompts;
    Json scores = Json::array();
    for (const auto& m : pass.masks) scores.push_back(m.score);
    j["mask_scores"] = scores;
    if (with_timings) j["timings"] = timings_to_json(pass.timings);
    return j;
}

}  // namespace

std::vector<std::uint32_t> rle_encode(const BinaryImage& mask) {
    std::vector<std::uint32_t> counts;
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (std::uint8_t v : mask.values()) {
        const std::uint8_t bit = v ? 1 : 0;
        if (bit != current) {
            counts.push_back(run);
            run = 0;
            current = bit;
        }
        ++run;
    }
    counts.push_back(run);
    return counts;
}

BinaryImage rle_decode(int width, int height, const std::vector<std::uint32_t>& counts) {
    BinaryImage mask(width, height, 0);
    auto values = mask.values();
    std::size_t pos = 0;
    std::uint8_t bit = 0;
    for (std::uint32_t run : counts) {
        if (run > values.size() - pos) throw Error("mask RLE overruns the image");
        std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(pos), run, bit);
        pos += run;
        bit ^= 1;
    }
    if (pos != values.size()) throw Error("mask RLE covers " + std::to_string(pos) + " of " +
                                          std::to_string(values.size()) + " pixels");
    return mask;
}

Json mask_to_json(const BinaryImage& mask) {
    return Json{{"width", mask.width()}, {"height", mask.height()}, {"counts", rle_encode(mask)}};
}

BinaryImage mask_from_json(const Json& j) {
    return rle_decode(require(j, "width", "mask").get<int>(), require(j, "height", "mask").get<int>(),
                      require(j, "counts", "mask").get<std::vector<std::uint32_t>>());
}

Json box_to_json(const BoundingBox& box) {
    return Json{{"x0", box.x0}, {"y0", box.y0}, {"x1", box.x1}, {"y1", box.y1}, {"confidence", box.confidence}};
}

BoundingBox box_from_json(const Json& j) {
    return {require(j, "x0", "box").get<int>(), require(j, "y0", "box").get<int>(),
            require(j, "x1", "box").get<int>(), require(j, "y1", "box").get<int>(), j.value("confidence", 1.0)};
}

Json scene_to_json(const SceneSpec& scene) {
    Json objects = Json::array();
    for (const auto& o : scene.objects) {
        objects.push_back(Json{{"id", o.id},
                               {"center", {o.cx, o.cy}},
                               {"radii", {o.rx, o.ry}},
                               {"angle", o.angle},
                               {"class_label", o.label},
                               {"box", box_to_json(o.box)},
                               {"mask", mask_to_json(o.mask)}});
    }
    return Json{{"width", scene.width},
                {"height", scene.height},
                {"seed", scene.seed},
                {"support_label", scene.support_label},
                {"achieved_scale_cv", scene.achieved_scale_cv},
                {"objects", objects}};
}

SceneSpec scene_from_json(const Json& j) {
    try {
        const int width = require(j, "width", "scene").get<int>();
        const int height = require(j, "height", "scene").get<int>();
        std::vector<SceneObject> objects;
        std::vector<int> ids;
        std::vector<BinaryImage> stored;
        for (const auto& jo : require(j, "objects", "scene")) {
            SceneObject o;
            const auto& center = require(jo, "center", "scene object");
            const auto& radii = require(jo, "radii", "scene object");
            o.cx = center.at(0).get<double>();
            o.cy = center.at(1).get<double>();
            o.rx = radii.at(0).get<double>();
            o.ry = radii.at(1).get<double>();
            o.angle = jo.value("angle", 0.0);
            o.label = require(jo, "class_label", "scene object").get<std::string>();
            ids.push_back(require(jo, "id", "scene object").get<int>());
            stored.push_back(jo.contains("mask") ? mask_from_json(jo.at("mask")) : BinaryImage{});
            objects.push_back(std::move(o));
        }
        if (std::set<int>(ids.begin(), ids.end()).size() != ids.size()) throw Error("scene: object ids are not unique");
        auto scene = make_scene(width, height, require(j, "seed", "scene").get<std::uint64_t>(),
                                require(j, "support_label", "scene").get<std::string>(), std::move(objects));
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            scene.objects[i].id = ids[i];
            if (stored[i].size() != 0 && !(stored[i] == scene.objects[i].mask))
                throw Error("scene: stored mask of object " + std::to_string(ids[i]) +
                            " does not match its ellipse");
        }
        if (j.contains("achieved_scale_cv")) scene.achieved_scale_cv = j.at("achieved_scale_cv").get<double>();
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("scene: ") + e.what());
    }
}

Json provider_config_to_json(const ProviderConfig& c) {
    return Json{{"blob_sigma_factor", c.blob_sigma_factor},
                {"scale_tolerance", c.scale_tolerance},
                {"sim_noise", c.sim_noise},
                {"box_jitter", c.box_jitter},
                {"grounding_threshold", c.grounding_threshold},
                {"recall", c.recall},
                {"confidence_min", c.confidence_min},
                {"confidence_max", c.confidence_max},
                {"mask_noise", c.mask_noise},
                {"distractor_response", c.distractor_response}};
}

Json pipeline_config_to_json(const PipelineConfig& c) {
    return Json{{"T", c.threshold},
                {"k", c.k},
                {"m", c.m},
                {"feedback_iterations", c.feedback_iterations},
                {"emit_composite_parents", c.emit_composite_parents},
                {"count_mode", std::string(to_string(c.count_mode))},
                {"use_ppsm", c.use_ppsm},
                {"providers", provider_config_to_json(c.providers)}};
}

void apply_provider_config(const Json& j, ProviderConfig& out, const std::string& where) {
    if (!j.is_object()) field_error(where, "expected an object");
    ProviderConfig cfg = out;
    for (const auto& [key, v] : j.items()) {
        const std::string f = where + "." + key;
        if (key == "blob_sigma_factor") cfg.blob_sigma_factor = get_number(v, f);
        else if (key == "scale_tolerance") cfg.scale_tolerance = get_number(v, f);
        else if (key == "sim_noise") cfg.sim_noise = get_number(v, f);
        else if (key == "box_jitter") cfg.box_jitter = get_number(v, f);
        else if (key == "grounding_threshold") cfg.grounding_threshold = get_number(v, f);
        else if (key == "recall") cfg.recall = get_number(v, f);
        else if (key == "confidence_min") cfg.confidence_min = get_number(v, f);
        else if (key == "confidence_max") cfg.confidence_max = get_number(v, f);
        else if (key == "mask_noise") cfg.mask_noise = get_number(v, f);
        else if (key == "distractor_response") cfg.distractor_response = get_number(v, f);
        else field_error(f, "unknown field");
    }
    try {
        validate(cfg);
    } catch (const Error& e) {
        field_error(where, e.what());
    }
    out = cfg;
}

void apply_pipeline_config(const Json& j, PipelineConfig& out, const std::string& where) {
    if (!j.is_object()) field_error(where, "expected an object");
    PipelineConfig cfg = out;
    for (const auto& [key, v] : j.items()) {
        const std::string f = where + "." + key;
        if (key == "T") cfg.threshold = get_int(v, f);
        else if (key == "k") cfg.k = get_number(v, f);
        else if (key == "m") cfg.m = get_int(v, f);
        else if (key == "feedback_iterations") cfg.feedback_iterations = get_int(v, f);
        else if (key == "emit_composite_parents") cfg.emit_composite_parents = get_bool(v, f);
        else if (key == "use_ppsm") cfg.use_ppsm = get_bool(v, f);
        else if (key == "count_mode") {
            try {
                cfg.count_mode = count_mode_from_string(get_string(v, f));
            } catch (const Error& e) {
                field_error(f, e.what());
            }
        } else if (key == "providers") apply_provider_config(v, cfg.providers, f);
        else field_error(f, "unknown field");
    }
    try {
        validate(cfg);
    } catch (const Error& e) {
        field_error(where, e.what());
    }
    out = cfg;
}

Json result_to_json(const std::string& id, const std::string& variant, const RunOutput& run,
                    const SegmentationResult& final_pass, bool with_timings) {
    Json boxes = Json::array();
    for (const auto& b : run.boxes) boxes.push_back(box_to_json(b));
    Json passes = Json::array();
    passes.push_back(pass_to_json(run.initial, with_timings));
    for (const auto& p : run.feedback) passes.push_back(pass_to_json(p, with_timings));

    Json prompts = Json::array();
    for (const auto& p : final_pass.prompts) prompts.push_back(prompt_to_json(p));
    Json masks = Json::array();
    for (const auto& m : final_pass.masks) masks.push_back(Json{{"score", m.score}, {"rle", mask_to_json(m.bits)}});

    Json j{{"id", id},
           {"variant", variant},
           {"label", run.label},
           {"grounding_prompt", run.grounding_prompt},
           {"boxes", boxes},
           {"initial_exemplar", box_to_json(run.initial_exemplar.box)},
           {"passes", passes},
           {"prompts", prompts},
           {"masks", masks},
           {"merged_mask", mask_to_json(final_pass.merged_mask.bits)}};
    if (with_timings) j["total_ms"] = run.total_ms();
    return j;
}

ResultRecord result_from_json(const Json& j) {
    try {
        ResultRecord r;
        r.id = require(j, "id", "result").get<std::string>();
        r.variant = j.value("variant", std::string("full"));
        for (const auto& p : require(j, "prompts", "result")) r.prompts.push_back(prompt_from_json(p));
        for (const auto& m : require(j, "masks", "result"))
            r.masks.push_back({mask_from_json(require(m, "rle", "result mask")), m.value("score", 0.0)});
        if (r.masks.size() != r.prompts.size()) throw Error("result " + r.id + ": masks and prompts differ in count");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("result: ") + e.what());
    }
}

Json report_to_json(const EvalReport& report) {
    Json bins = Json::array();
    for (const auto& b : report.bins) {
        bins.push_back(Json{{"bin", std::string(to_string(b.bin))},
                            {"scenes", b.scenes},
                            {"miou", b.miou},
                            {"precision", b.precision},
                            {"recall", b.recall},
                            {"f1", b.f1}});
    }
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        rows.push_back(Json{{"id", r.id},
                            {"n_objects", r.n_objects},
                            {"bin", std::string(to_string(r.bin))},
                            {"miou", r.miou},
                            {"precision", r.precision},
                            {"recall", r.recall},
                            {"f1", r.f1},
                            {"n_prompts", r.n_prompts}});
    }
    return Json{{"miou", report.miou},     {"precision", report.precision}, {"recall", report.recall},
                {"f1", report.f1},         {"bins", bins},                  {"scenes", rows},
                {"fingerprint", report.fingerprint}};
}

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string fingerprint(const Json& j) {
    return sha256_hex(j.dump());
}

}  // namespace persense
