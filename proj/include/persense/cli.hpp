#pragma once

#include "persense/eval.hpp"
#include "persense/pipeline.hpp"
#include "persense/serialize.hpp"
#include "persense/suites.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace persense::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kAcceptanceFailed = 1, kUsage = 2, kIoOrProvider = 3 };

/// Filesystem and provider failures; mapped to exit code 3.
class IoError : public Error {
public:
    using Error::Error;
};

struct Thresholds {
    std::optional<double> min_miou;
    std::optional<double> min_precision;
    std::optional<double> min_recall;
    std::optional<double> min_f1;
};

/// Where scenes come from when no scene directory is given.
struct SceneSource {
    std::string suite = "standard";
    std::uint64_t base_seed = 1000;
    int count = 50;
    /// When set, scenes are generated from these parameters, one per seed,
    /// instead of a named suite.
    std::optional<SceneParams> generator;
    std::vector<std::uint64_t> seeds;
};

struct RunConfig {
    SceneSource scenes;
    PipelineConfig pipeline;
    /// Provider keys given in the file; applied over each scene's defaults.
    Json provider_overrides = Json::object();
    Matching matching = Matching::greedy;
    Thresholds thresholds;
    int jobs = 1;
};

RunConfig config_from_json(const Json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical form; every field is written so the fingerprint changes iff a
/// field changes.
Json config_to_json(const RunConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);

std::vector<SuiteCase> build_cases(const RunConfig& cfg);
/// Scene files (*.json) of a directory in name order; ids are file stems.
std::vector<SuiteCase> load_cases(const std::filesystem::path& dir, const RunConfig& cfg);

/// Names of unmet thresholds; empty when all pass.
std::vector<std::string> unmet_thresholds(const EvalReport& report, const Thresholds& t);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_png(const std::filesystem::path& path, const GrayImage& image);

int main_entry(int argc, char** argv);

}  // namespace persense::cli
