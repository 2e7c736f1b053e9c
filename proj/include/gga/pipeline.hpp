#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <gga/baselines.hpp>
#include <gga/detector.hpp>
#include <gga/graph.hpp>
#include <gga/labeling.hpp>
#include <gga/table.hpp>
#include <gga/trace.hpp>

namespace gga::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
    fs::path subgraphs;
    fs::path traces;
    std::optional<fs::path> embeddings;
    std::optional<fs::path> nli;
    std::optional<fs::path> prompt_template;
    std::optional<fs::path> patterns;
    fs::path out = "out";
    std::size_t k = 20;
    double f1_threshold = labeling::kDefaultF1Threshold;
    detector::ModelKind kind = detector::ModelKind::kGbdt;
    std::string subset = "gga-full";
    std::uint64_t seed = detector::kDefaultSeed;
    baselines::ReferenceSource reference = baselines::ReferenceSource::kQuestion;
    std::size_t folds = 3;
};

// Relative paths in a config file resolve against `base`.
PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base = {});
nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig load_config(const fs::path& path);
// GGA_SEED, when set, replaces the seed.
void apply_environment(PipelineConfig& c);

// ---------------------------------------------------------------------------
// Stages. Each returns its artifact in memory; the write_* helpers put it on
// disk in the interchange format.
// ---------------------------------------------------------------------------

// One pruned.jsonl line: pruned triples, flags, scores and the rendered prompt
// with its character spans.
nlohmann::json prune_record(const graph::SubgraphRecord& record, std::size_t k, const std::string& prompt_template);
std::vector<nlohmann::json> prune_stage(std::span<const graph::SubgraphRecord> records, std::size_t k,
                                        const std::string& prompt_template);
void write_jsonl(const fs::path& path, std::span<const nlohmann::json> lines);

// Loads and validates a trace directory; failures name the stage and id.
std::vector<trace::TraceExample> load_traces(const fs::path& dir, const std::string& stage);

// id, prd, sas.
CsvTable metrics_stage(std::span<const trace::TraceExample> traces);
// Per-layer-head PRD values in a GGAT1 container.
void write_per_head(const fs::path& path, std::span<const trace::TraceExample> traces);

// id, label (1 = hallucinated), em, best_f1.
CsvTable label_stage(std::span<const trace::TraceExample> traces, double f1_threshold,
                     const labeling::Normalizer& normalizer);

// Raw contradiction probabilities keyed by id, from an id,nli_contra CSV.
std::map<std::string, double> read_nli(const fs::path& path);

// id plus the six baseline columns; cells are blank when their inputs are absent.
CsvTable baselines_stage(std::span<const trace::TraceExample> traces, const baselines::EmbeddingTable* embeddings,
                         const std::map<std::string, double>* nli, baselines::ReferenceSource reference);

// prd, sas, surface cues, then any baseline columns, keyed by trace id.
detector::FeatureTable features_stage(std::span<const trace::TraceExample> traces, const CsvTable& metrics,
                                      const CsvTable* baselines);

// Labels aligned with the feature ids; throws InputError for a missing id.
std::vector<int> align_labels(const detector::FeatureTable& features, const CsvTable& labels);

detector::DetectorModel train_stage(const detector::FeatureTable& features, std::span<const int> labels,
                                    detector::ModelKind kind, const std::string& subset, std::uint64_t seed);

// In-sample metrics at the model threshold plus k-fold cross-validation.
nlohmann::json eval_stage(const detector::DetectorModel& model, const detector::FeatureTable& features,
                          std::span<const int> labels, std::size_t folds, std::uint64_t seed);

struct AnalysisArtifacts {
    nlohmann::json report;
    CsvTable plot; // id, prd, sas, label, quadrant
};
AnalysisArtifacts analyze_stage(const detector::FeatureTable& features, std::span<const int> labels);

void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

struct RunResult {
    std::vector<fs::path> artifacts;
};

/// Runs prune, metrics, label, baselines (when embeddings are configured),
/// features, train, eval and analyze, writing every artifact under c.out.
/// Throws StageError naming the failing stage and, where known, the id.
RunResult run_pipeline(const PipelineConfig& c);

} // namespace gga::pipeline
