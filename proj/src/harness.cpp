#include "persense/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace persense {

std::vector<std::exception_ptr> parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, jobs));
    if (threads == 1 || n <= 1) {
        worker();
        return errors;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    pool.clear();
    return errors;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

RunOutput run_case(const SuiteCase& sc, const PipelineConfig& cfg) {
    PipelineConfig local = cfg;
    local.providers = sc.providers;
    const SyntheticProviders providers(sc.scene, sc.providers);
    const auto support = make_support(*sc.scene, sc.scene->support_label);
    try {
        return run_persense(support, providers.view(), local);
    } catch (const std::exception& e) {
        throw Error(sc.id + ": " + e.what());
    }
}

std::vector<CaseResult> run_cases(std::span<const SuiteCase> cases, const PipelineConfig& cfg, int jobs) {
    std::vector<CaseResult> out(cases.size());
    rethrow_first(parallel_for(cases.size(), jobs, [&](std::size_t i) {
        out[i] = {cases[i].id, run_case(cases[i], cfg)};
    }));
    return out;
}

SuiteEval evaluate_suite(std::span<const SuiteCase> cases, const PipelineConfig& cfg, int jobs, Matching matching) {
    SuiteEval ev;
    ev.initial.resize(cases.size());
    ev.final.resize(cases.size());
    std::vector<double> ms(cases.size(), 0.0);
    rethrow_first(parallel_for(cases.size(), jobs, [&](std::size_t i) {
        const auto run = run_case(cases[i], cfg);
        const auto& scene = *cases[i].scene;
        ev.initial[i] = evaluate_scene(cases[i].id, scene, run.initial.prompts, run.initial.masks, matching);
        const auto& fin = run.final_result();
        ev.final[i] = evaluate_scene(cases[i].id, scene, fin.prompts, fin.masks, matching);
        ms[i] = run.total_ms();
    }));
    for (double v : ms) ev.pipeline_ms += v;
    return ev;
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::ppsm: return "ppsm";
        case Variant::full: return "full";
    }
    return "?";
}

AblationRun run_ablation_case(const SuiteCase& sc, const PipelineConfig& cfg) {
    PipelineConfig full = cfg;
    full.use_ppsm = true;
    full.feedback_iterations = std::max(1, cfg.feedback_iterations);
    full.providers = sc.providers;
    AblationRun out{run_case(sc, full), {}};

    PipelineConfig base = full;
    base.use_ppsm = false;
    const SyntheticProviders providers(sc.scene, sc.providers);
    const Exemplar initial[] = {out.run.initial_exemplar};
    out.baseline = run_pass(initial, out.run.boxes, out.run.similarity, providers.view(), base);
    return out;
}

AblationEval evaluate_ablation(std::span<const SuiteCase> cases, const PipelineConfig& cfg, int jobs,
                               Matching matching) {
    AblationEval ev;
    ev.baseline.resize(cases.size());
    ev.ppsm.resize(cases.size());
    ev.full.resize(cases.size());
    rethrow_first(parallel_for(cases.size(), jobs, [&](std::size_t i) {
        const auto ab = run_ablation_case(cases[i], cfg);
        const auto& scene = *cases[i].scene;
        const auto& id = cases[i].id;
        ev.baseline[i] = evaluate_scene(id, scene, ab.baseline.prompts, ab.baseline.masks, matching);
        ev.ppsm[i] = evaluate_scene(id, scene, ab.run.initial.prompts, ab.run.initial.masks, matching);
        const auto& fin = ab.run.final_result();
        ev.full[i] = evaluate_scene(id, scene, fin.prompts, fin.masks, matching);
    }));
    return ev;
}

double mean_miou(std::span<const SceneRow> rows) {
    return aggregate({rows.begin(), rows.end()}).miou;
}

double mean_recall(std::span<const SceneRow> rows) {
    return aggregate({rows.begin(), rows.end()}).recall;
}

std::string_view to_string(SweepParam p) {
    switch (p) {
        case SweepParam::k: return "k";
        case SweepParam::m: return "m";
        case SweepParam::T: return "T";
        case SweepParam::iterations: return "iterations";
    }
    return "?";
}

SweepParam sweep_param_from_string(std::string_view text) {
    if (text == "k") return SweepParam::k;
    if (text == "m") return SweepParam::m;
    if (text == "T") return SweepParam::T;
    if (text == "iterations") return SweepParam::iterations;
    throw Error("unknown sweep parameter '" + std::string(text) + "' (expected k, m, T or iterations)");
}

PipelineConfig with_param(PipelineConfig cfg, SweepParam param, double value) {
    auto as_int = [&](const char* name) {
        if (value != std::floor(value)) throw Error(std::string("sweep value for ") + name + " must be an integer");
        return static_cast<int>(value);
    };
    switch (param) {
        case SweepParam::k: cfg.k = value; break;
        case SweepParam::m: cfg.m = as_int("m"); break;
        case SweepParam::T: cfg.threshold = as_int("T"); break;
        case SweepParam::iterations: cfg.feedback_iterations = as_int("iterations"); break;
    }
    validate(cfg);
    return cfg;
}

std::vector<SweepRow> run_sweep(std::span<const SuiteCase> cases, const PipelineConfig& cfg, SweepParam param,
                                std::vector<double> values, int jobs, Matching matching) {
    if (values.empty()) throw Error("sweep needs at least one value");
    std::sort(values.begin(), values.end());
    std::vector<SweepRow> rows;
    for (double v : values) {
        const auto ev = evaluate_suite(cases, with_param(cfg, param, v), jobs, matching);
        const auto rep = aggregate(ev.final);
        rows.push_back({v, rep.miou, rep.precision, rep.recall, rep.f1, ev.pipeline_ms, false});
    }
    auto best = rows.begin();
    for (auto it = rows.begin(); it != rows.end(); ++it)
        if (it->miou > best->miou) best = it;
    best->best = true;
    return rows;
}

std::string sweep_table(SweepParam param, std::span<const SweepRow> rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %8s %9s %8s %8s %12s\n", std::string(to_string(param)).c_str(), "mIoU",
                  "precision", "recall", "f1", "time_ms");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-10.4f %8.4f %9.4f %8.4f %8.4f %12.1f%s\n", r.value, r.miou, r.precision,
                      r.recall, r.f1, r.pipeline_ms, r.best ? "  *" : "");
        out << line;
    }
    return out.str();
}

}  // namespace persense
