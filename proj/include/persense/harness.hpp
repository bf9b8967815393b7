#pragma once

#include "persense/eval.hpp"
#include "persense/pipeline.hpp"
#include "persense/suites.hpp"

#include <exception>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace persense {

/// Runs fn(0..n-1) on up to `jobs` threads. Each index's exception is
/// captured; the returned vector holds nullptr for indices that succeeded.
std::vector<std::exception_ptr> parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Rethrows the first captured exception, if any.
void rethrow_first(const std::vector<std::exception_ptr>& errors);

/// Pipeline run of one suite case with the case's own provider settings.
RunOutput run_case(const SuiteCase& sc, const PipelineConfig& cfg);

struct CaseResult {
    std::string id;
    RunOutput run;
};

std::vector<CaseResult> run_cases(std::span<const SuiteCase> cases, const PipelineConfig& cfg, int jobs = 1);

/// Scene rows for the initial and final pass of every case.
struct SuiteEval {
    std::vector<SceneRow> initial;
    std::vector<SceneRow> final;
    double pipeline_ms = 0.0;  // summed over cases
};

SuiteEval evaluate_suite(std::span<const SuiteCase> cases, const PipelineConfig& cfg, int jobs = 1,
                         Matching matching = Matching::greedy);

enum class Variant { baseline, ppsm, full };
std::string_view to_string(Variant v);

/// Baseline decodes every IDM candidate without feedback; +PPSM adds prompt
/// selection; full adds at least one feedback iteration. All three share
/// the same initial exemplar.
struct AblationRun {
    RunOutput run;                 // +PPSM is run.initial, full is run.final_result()
    SegmentationResult baseline;
};

AblationRun run_ablation_case(const SuiteCase& sc, const PipelineConfig& cfg);

struct AblationEval {
    std::vector<SceneRow> baseline;
    std::vector<SceneRow> ppsm;
    std::vector<SceneRow> full;
};

AblationEval evaluate_ablation(std::span<const SuiteCase> cases, const PipelineConfig& cfg, int jobs = 1,
                               Matching matching = Matching::greedy);

double mean_miou(std::span<const SceneRow> rows);
double mean_recall(std::span<const SceneRow> rows);

enum class SweepParam { k, m, T, iterations };
std::string_view to_string(SweepParam p);
SweepParam sweep_param_from_string(std::string_view text);

struct SweepRow {
    double value = 0.0;
    double miou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double pipeline_ms = 0.0;
    bool best = false;
};

/// Config with `param` set to `value`.
PipelineConfig with_param(PipelineConfig cfg, SweepParam param, double value);

/// One evaluation per value, sorted by value; the highest mIoU is flagged
/// (first one on ties).
std::vector<SweepRow> run_sweep(std::span<const SuiteCase> cases, const PipelineConfig& cfg, SweepParam param,
                                std::vector<double> values, int jobs = 1, Matching matching = Matching::greedy);

std::string sweep_table(SweepParam param, std::span<const SweepRow> rows);

}  // namespace persense
