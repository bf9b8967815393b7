#include "persense/cli.hpp"

#include "persense/harness.hpp"
#include "persense/overlay.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace persense::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw Error("config field '" + field + "': " + what);
}

double number_at(const Json& v, const std::string& f) {
    if (!v.is_number()) field_error(f, "expected a number");
    return v.get<double>();
}

int int_at(const Json& v, const std::string& f) {
    if (!v.is_number_integer()) field_error(f, "expected an integer");
    return v.get<int>();
}

std::uint64_t seed_at(const Json& v, const std::string& f) {
    if (!v.is_number_unsigned()) field_error(f, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::string string_at(const Json& v, const std::string& f) {
    if (!v.is_string()) field_error(f, "expected a string");
    return v.get<std::string>();
}

SceneParams generator_from_json(const Json& j) {
    SceneParams p;
    if (!j.is_object()) field_error("scenes.generator", "expected an object");
    for (const auto& [key, v] : j.items()) {
        const std::string f = "scenes.generator." + key;
        if (key == "n_objects") p.n_objects = int_at(v, f);
        else if (key == "scale_cv") p.scale_cv = number_at(v, f);
        else if (key == "overlap_fraction") p.overlap_fraction = number_at(v, f);
        else if (key == "width") p.width = int_at(v, f);
        else if (key == "height") p.height = int_at(v, f);
        else if (key == "mean_radius") p.mean_radius = number_at(v, f);
        else if (key == "min_radius") p.min_radius = number_at(v, f);
        else if (key == "aspect_jitter") p.aspect_jitter = number_at(v, f);
        else if (key == "label") p.label = string_at(v, f);
        else if (key == "n_distractors") p.n_distractors = int_at(v, f);
        else if (key == "distractor_label") p.distractor_label = string_at(v, f);
        else if (key == "large_scale_ratio") p.large_scale_ratio = number_at(v, f);
        else if (key == "large_fraction") p.large_fraction = number_at(v, f);
        else if (key == "max_attempts") p.max_attempts = int_at(v, f);
        else field_error(f, "unknown field");
    }
    return p;
}

Json generator_to_json(const SceneParams& p) {
    return Json{{"n_objects", p.n_objects},
                {"scale_cv", p.scale_cv},
                {"overlap_fraction", p.overlap_fraction},
                {"width", p.width},
                {"height", p.height},
                {"mean_radius", p.mean_radius},
                {"min_radius", p.min_radius},
                {"aspect_jitter", p.aspect_jitter},
                {"label", p.label},
                {"n_distractors", p.n_distractors},
                {"distractor_label", p.distractor_label},
                {"large_scale_ratio", p.large_scale_ratio},
                {"large_fraction", p.large_fraction},
                {"max_attempts", p.max_attempts}};
}

Json load_json(const fs::path& path) {
    const auto text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(path.string() + ": invalid JSON at byte " + std::to_string(e.byte));
    }
}

void dump_json(const fs::path& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error("sweep value '" + item + "' is not a number");
        }
    }
    if (values.empty()) throw Error("sweep needs at least one value");
    return values;
}

Json manifest(const std::string& command, const std::optional<fs::path>& config_path, const RunConfig& cfg,
              const std::vector<SuiteCase>& cases, const Json& layout) {
    Json seeds = Json::array();
    Json ids = Json::array();
    for (const auto& c : cases) {
        seeds.push_back(c.scene->seed);
        ids.push_back(c.id);
    }
    return Json{{"tool", "persense"},
                {"version", kVersion},
                {"command", command},
                {"config_path", config_path ? config_path->string() : std::string()},
                {"config", config_to_json(cfg)},
                {"fingerprint", config_fingerprint(cfg)},
                {"seeds", seeds},
                {"scenes", ids},
                {"layout", layout}};
}

struct CommonOptions {
    std::string config;
    int jobs = 0;  // 0: take the config value
    std::optional<double> k;
    std::optional<int> m;
    std::optional<int> T;
    std::optional<int> iterations;
    std::string count_mode;
    std::string matching;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("-c,--config", o.config, "JSON config file");
    app->add_option("-j,--jobs", o.jobs, "Scenes processed in parallel")->check(CLI::PositiveNumber);
    app->add_option("--k", o.k, "PPSM normalization factor");
    app->add_option("--m", o.m, "Exemplars kept by feedback");
    app->add_option("--T", o.T, "Density threshold");
    app->add_option("--iterations", o.iterations, "Feedback iterations");
    app->add_option("--count-mode", o.count_mode, "idm_candidates or dm_integral");
    app->add_option("--matching", o.matching, "greedy or hungarian");
}

RunConfig resolve_config(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (o.k) cfg.pipeline.k = *o.k;
    if (o.m) cfg.pipeline.m = *o.m;
    if (o.T) cfg.pipeline.threshold = *o.T;
    if (o.iterations) cfg.pipeline.feedback_iterations = *o.iterations;
    if (!o.count_mode.empty()) cfg.pipeline.count_mode = count_mode_from_string(o.count_mode);
    if (!o.matching.empty()) cfg.matching = matching_from_string(o.matching);
    validate(cfg.pipeline);
    return cfg;
}

std::optional<fs::path> config_path(const CommonOptions& o) {
    if (o.config.empty()) return std::nullopt;
    return fs::path(o.config);
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonOptions& o, const fs::path& out_dir) {
    const auto cfg = resolve_config(o);
    const auto cases = build_cases(cfg);
    const auto scene_dir = out_dir / "scenes";
    auto errors = parallel_for(cases.size(), cfg.jobs, [&](std::size_t i) {
        const auto& c = cases[i];
        dump_json(scene_dir / (c.id + ".json"), scene_to_json(*c.scene));
        write_png(scene_dir / (c.id + "_gt.png"), ground_truth_image(*c.scene));
        write_png(scene_dir / (c.id + "_preview.png"), scene_preview(*c.scene));
    });
    rethrow_first(errors);
    dump_json(out_dir / "manifest.json",
              manifest("synth", config_path(o), cfg, cases,
                       Json{{"scenes", "scenes/<id>.json"},
                            {"ground_truth", "scenes/<id>_gt.png"},
                            {"preview", "scenes/<id>_preview.png"}}));
    for (const auto& c : cases)
        std::cout << c.id << "  objects=" << c.scene->objects.size() << "  cv=" << c.scene->achieved_scale_cv << '\n';
    return kOk;
}

struct RunFlags {
    std::string scenes;
    bool ablation = false;
    bool no_feedback = false;
    bool stage_dumps = false;
    bool no_timings = false;
};

int cmd_run(const CommonOptions& o, const RunFlags& f, const fs::path& out_dir) {
    auto cfg = resolve_config(o);
    if (f.no_feedback) cfg.pipeline.feedback_iterations = 0;
    const auto cases = f.scenes.empty() ? build_cases(cfg) : load_cases(f.scenes, cfg);
    const auto results_dir = out_dir / "results";
    std::mutex log_mutex;
    auto errors = parallel_for(cases.size(), cfg.jobs, [&](std::size_t i) {
        const auto& c = cases[i];
        try {
            if (f.ablation) {
                const auto ab = run_ablation_case(c, cfg.pipeline);
                const auto& run = ab.run;
                dump_json(results_dir / (c.id + ".baseline.json"),
                          result_to_json(c.id, "baseline", run, ab.baseline, !f.no_timings));
                dump_json(results_dir / (c.id + ".ppsm.json"),
                          result_to_json(c.id, "ppsm", run, run.initial, !f.no_timings));
                dump_json(results_dir / (c.id + ".full.json"),
                          result_to_json(c.id, "full", run, run.final_result(), !f.no_timings));
                if (f.stage_dumps)
                    for (const auto& [name, img] : stage_panels(run))
                        write_png(out_dir / "overlays" / c.id / (name + ".png"), img);
            } else {
                const auto run = run_case(c, cfg.pipeline);
                dump_json(results_dir / (c.id + ".json"),
                          result_to_json(c.id, "full", run, run.final_result(), !f.no_timings));
                if (f.stage_dumps)
                    for (const auto& [name, img] : stage_panels(run))
                        write_png(out_dir / "overlays" / c.id / (name + ".png"), img);
            }
        } catch (const std::exception& e) {
            std::lock_guard lock(log_mutex);
            spdlog::error("scene {} failed: {}", c.id, e.what());
            throw;
        }
    });
    const auto failed = std::count_if(errors.begin(), errors.end(), [](const auto& e) { return e != nullptr; });
    dump_json(out_dir / "manifest.json",
              manifest("run", config_path(o), cfg, cases,
                       Json{{"results", f.ablation ? "results/<id>.<baseline|ppsm|full>.json" : "results/<id>.json"},
                            {"overlays", f.stage_dumps ? "overlays/<id>/<stage>.png" : ""}}));
    std::cout << cases.size() - static_cast<std::size_t>(failed) << " of " << cases.size() << " scenes completed\n";
    return failed == 0 ? kOk : kIoOrProvider;
}

int cmd_eval(const CommonOptions& o, const std::string& results, const std::string& scenes,
             const std::string& variant, const std::string& format, const std::string& out) {
    const auto cfg = resolve_config(o);
    std::map<std::string, ResultRecord> records;
    for (const auto& entry : fs::directory_iterator(results)) {
        if (entry.path().extension() != ".json") continue;
        ResultRecord rec;
        try {
            rec = result_from_json(load_json(entry.path()));
        } catch (const Error& e) {
            throw IoError(entry.path().string() + ": " + e.what());
        }
        if (rec.variant != variant) continue;
        records.emplace(rec.id, std::move(rec));
    }
    std::map<std::string, SuiteCase> scene_map;
    if (scenes.empty()) {
        for (auto& c : build_cases(cfg)) scene_map.emplace(c.id, std::move(c));
    } else {
        for (auto& c : load_cases(scenes, cfg)) scene_map.emplace(c.id, std::move(c));
    }

    std::vector<std::string> missing;
    for (const auto& [id, _] : records)
        if (!scene_map.count(id)) missing.push_back("result " + id + " has no scene");
    for (const auto& [id, _] : scene_map)
        if (!records.count(id)) missing.push_back("scene " + id + " has no '" + variant + "' result");
    if (!missing.empty()) {
        std::string msg = "unpaired inputs:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw IoError(msg);
    }

    std::vector<SceneRow> rows;
    for (const auto& [id, rec] : records)
        rows.push_back(evaluate_scene(id, *scene_map.at(id).scene, rec.prompts, rec.masks, cfg.matching));
    const auto report = aggregate(std::move(rows), config_fingerprint(cfg));

    std::string text;
    if (format == "json") text = report_to_json(report).dump(2) + "\n";
    else if (format == "csv") text = report_csv(report);
    else text = report_table(report);
    if (out.empty()) std::cout << text;
    else write_text(out, text);

    const auto unmet = unmet_thresholds(report, cfg.thresholds);
    for (const auto& u : unmet) std::cerr << "threshold not met: " << u << '\n';
    return unmet.empty() ? kOk : kAcceptanceFailed;
}

int cmd_sweep(const CommonOptions& o, const std::string& param_name, const std::string& values_text,
              const std::string& scenes, const std::string& out) {
    const auto cfg = resolve_config(o);
    const auto param = sweep_param_from_string(param_name);
    const auto values = parse_values(values_text);
    for (double v : values) with_param(cfg.pipeline, param, v);
    const auto cases = scenes.empty() ? build_cases(cfg) : load_cases(scenes, cfg);
    std::vector<SweepRow> rows;
    try {
        rows = run_sweep(cases, cfg.pipeline, param, values, cfg.jobs, cfg.matching);
    } catch (const Error& e) {
        throw IoError(e.what());
    }
    std::cout << sweep_table(param, rows);
    if (!out.empty()) {
        Json j = Json::array();
        for (const auto& r : rows) {
            j.push_back(Json{{"value", r.value},
                             {"miou", r.miou},
                             {"precision", r.precision},
                             {"recall", r.recall},
                             {"f1", r.f1},
                             {"time_ms", r.pipeline_ms},
                             {"best", r.best}});
        }
        dump_json(out, Json{{"param", std::string(to_string(param))},
                            {"fingerprint", config_fingerprint(cfg)},
                            {"rows", j}});
    }
    return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw Error("config: expected a JSON object");
    RunConfig cfg;
    for (const auto& [key, v] : j.items()) {
        if (key == "scenes") {
            if (!v.is_object()) field_error("scenes", "expected an object");
            for (const auto& [sk, sv] : v.items()) {
                const std::string f = "scenes." + sk;
                if (sk == "suite") cfg.scenes.suite = string_at(sv, f);
                else if (sk == "base_seed") cfg.scenes.base_seed = seed_at(sv, f);
                else if (sk == "count") cfg.scenes.count = int_at(sv, f);
                else if (sk == "generator") cfg.scenes.generator = generator_from_json(sv);
                else if (sk == "seeds") {
                    if (!sv.is_array()) field_error(f, "expected an array");
                    for (const auto& s : sv) cfg.scenes.seeds.push_back(seed_at(s, f));
                } else field_error(f, "unknown field");
            }
        } else if (key == "pipeline") {
            apply_pipeline_config(v, cfg.pipeline);
        } else if (key == "providers") {
            ProviderConfig probe;
            apply_provider_config(v, probe);
            cfg.provider_overrides = v;
            cfg.pipeline.providers = probe;
        } else if (key == "matching") {
            try {
                cfg.matching = matching_from_string(string_at(v, "matching"));
            } catch (const Error& e) {
                field_error("matching", e.what());
            }
        } else if (key == "thresholds") {
            if (!v.is_object()) field_error("thresholds", "expected an object");
            for (const auto& [tk, tv] : v.items()) {
                const std::string f = "thresholds." + tk;
                if (tv.is_null() && (tk == "min_miou" || tk == "min_precision" || tk == "min_recall" || tk == "min_f1"))
                    continue;
                const double t = number_at(tv, f);
                if (t < 0.0 || t > 1.0) field_error(f, "must lie in [0,1]");
                if (tk == "min_miou") cfg.thresholds.min_miou = t;
                else if (tk == "min_precision") cfg.thresholds.min_precision = t;
                else if (tk == "min_recall") cfg.thresholds.min_recall = t;
                else if (tk == "min_f1") cfg.thresholds.min_f1 = t;
                else field_error(f, "unknown field");
            }
        } else if (key == "jobs") {
            cfg.jobs = int_at(v, "jobs");
            if (cfg.jobs < 1) field_error("jobs", "must be at least 1");
        } else {
            field_error(key, "unknown field");
        }
    }
    if (cfg.scenes.generator && cfg.scenes.seeds.empty())
        field_error("scenes.seeds", "required when scenes.generator is given");
    if (!cfg.scenes.generator) {
        const auto names = suite_names();
        if (std::find(names.begin(), names.end(), cfg.scenes.suite) == names.end())
            field_error("scenes.suite", "unknown suite '" + cfg.scenes.suite + "'");
        if (cfg.scenes.count < 1) field_error("scenes.count", "must be at least 1");
    }
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    return config_from_json(load_json(path));
}

Json config_to_json(const RunConfig& cfg) {
    Json scenes{{"suite", cfg.scenes.suite}, {"base_seed", cfg.scenes.base_seed}, {"count", cfg.scenes.count}};
    if (cfg.scenes.generator) {
        scenes["generator"] = generator_to_json(*cfg.scenes.generator);
        scenes["seeds"] = cfg.scenes.seeds;
    }
    Json pipeline = pipeline_config_to_json(cfg.pipeline);
    pipeline.erase("providers");
    Json thresholds = Json::object();
    auto put = [&](const char* name, const std::optional<double>& v) {
        thresholds[name] = v ? Json(*v) : Json(nullptr);
    };
    put("min_miou", cfg.thresholds.min_miou);
    put("min_precision", cfg.thresholds.min_precision);
    put("min_recall", cfg.thresholds.min_recall);
    put("min_f1", cfg.thresholds.min_f1);
    return Json{{"scenes", scenes},
                {"pipeline", pipeline},
                {"providers", cfg.provider_overrides},
                {"matching", std::string(to_string(cfg.matching))},
                {"thresholds", thresholds}};
}

std::string config_fingerprint(const RunConfig& cfg) {
    return fingerprint(config_to_json(cfg));
}

std::vector<SuiteCase> build_cases(const RunConfig& cfg) {
    std::vector<SuiteCase> cases;
    if (cfg.scenes.generator) {
        for (std::size_t i = 0; i < cfg.scenes.seeds.size(); ++i) {
            auto p = *cfg.scenes.generator;
            p.seed = cfg.scenes.seeds[i];
            cases.push_back({"seed-" + std::to_string(p.seed), std::make_shared<const SceneSpec>(generate_scene(p)),
                             ProviderConfig{}});
        }
    } else {
        cases = named_suite(cfg.scenes.suite, cfg.scenes.base_seed, cfg.scenes.count);
    }
    for (auto& c : cases) apply_provider_config(cfg.provider_overrides, c.providers);
    return cases;
}

std::vector<SuiteCase> load_cases(const fs::path& dir, const RunConfig& cfg) {
    if (!fs::is_directory(dir)) throw IoError("scene directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no scene files in " + dir.string());
    std::vector<SuiteCase> cases;
    for (const auto& path : files) {
        SuiteCase c;
        c.id = path.stem().string();
        try {
            c.scene = std::make_shared<const SceneSpec>(scene_from_json(load_json(path)));
        } catch (const IoError&) {
            throw;
        } catch (const Error& e) {
            throw IoError(path.string() + ": " + e.what());
        }
        apply_provider_config(cfg.provider_overrides, c.providers);
        cases.push_back(std::move(c));
    }
    return cases;
}

std::vector<std::string> unmet_thresholds(const EvalReport& report, const Thresholds& t) {
    std::vector<std::string> out;
    auto check = [&](const char* name, const std::optional<double>& min, double value) {
        if (min && value < *min) out.push_back(std::string(name) + " " + std::to_string(value) + " < " + std::to_string(*min));
    };
    check("miou", t.min_miou, report.miou);
    check("precision", t.min_precision, report.precision);
    check("recall", t.min_recall, report.recall);
    check("f1", t.min_f1, report.f1);
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_png(const fs::path& path, const GrayImage& image) {
    const auto bytes = encode_png(image);
    write_text(path, std::string(bytes.begin(), bytes.end()));
}

int main_entry(int argc, char** argv) {
    CLI::App app{"persense: one-shot multi-instance segmentation on synthetic scenes"};
    app.set_version_flag("--version", std::string("persense ") + kVersion);
    app.require_subcommand(1);

    CommonOptions synth_opts, run_opts, eval_opts, sweep_opts;
    std::string synth_out = "out", run_out = "out";
    RunFlags run_flags;
    std::string eval_results, eval_scenes, eval_variant = "full", eval_format = "text", eval_out;
    std::string sweep_param, sweep_values, sweep_scenes, sweep_out;

    auto* synth = app.add_subcommand("synth", "Generate scenes with ground truth");
    add_common(synth, synth_opts);
    synth->add_option("-o,--out", synth_out, "Output directory");

    auto* run = app.add_subcommand("run", "Run the pipeline on scenes");
    add_common(run, run_opts);
    run->add_option("-o,--out", run_out, "Output directory");
    run->add_option("-s,--scenes", run_flags.scenes, "Scene directory (default: scenes from the config)");
    run->add_flag("--ablation", run_flags.ablation, "Write baseline, +PPSM and full results");
    run->add_flag("--no-feedback", run_flags.no_feedback, "Skip the feedback pass");
    run->add_flag("--stage-dumps", run_flags.stage_dumps, "Write six stage PNGs per scene");
    run->add_flag("--no-timings", run_flags.no_timings, "Omit timings from result files");

    auto* eval = app.add_subcommand("eval", "Score results against scenes");
    add_common(eval, eval_opts);
    eval->add_option("-r,--results", eval_results, "Results directory")->required();
    eval->add_option("-s,--scenes", eval_scenes, "Scene directory (default: scenes from the config)");
    eval->add_option("--variant", eval_variant, "baseline, ppsm or full")
        ->check(CLI::IsMember({"baseline", "ppsm", "full"}));
    eval->add_option("--format", eval_format, "text, json or csv")->check(CLI::IsMember({"text", "json", "csv"}));
    eval->add_option("-o,--out", eval_out, "Write the report here instead of stdout");

    auto* sweep = app.add_subcommand("sweep", "Evaluate a parameter over several values");
    add_common(sweep, sweep_opts);
    sweep->add_option("-p,--param", sweep_param, "k, m, T or iterations")->required();
    sweep->add_option("-v,--values", sweep_values, "Comma-separated values")->required();
    sweep->add_option("-s,--scenes", sweep_scenes, "Scene directory (default: scenes from the config)");
    sweep->add_option("-o,--out", sweep_out, "Write the table as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*synth) return cmd_synth(synth_opts, synth_out);
        if (*run) return cmd_run(run_opts, run_flags, run_out);
        if (*eval) return cmd_eval(eval_opts, eval_results, eval_scenes, eval_variant, eval_format, eval_out);
        if (*sweep) return cmd_sweep(sweep_opts, sweep_param, sweep_values, sweep_scenes, sweep_out);
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        return kIoOrProvider;
    } catch (const RasterIoError& e) {
        spdlog::error("{}", e.what());
        return kIoOrProvider;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return kIoOrProvider;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kIoOrProvider;
    }
    return kUsage;
}

}  // namespace persense::cli
