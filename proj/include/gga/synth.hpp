#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <gga/detector.hpp>
#include <gga/trace.hpp>

namespace gga::synth {

// Parameters of one synthetic trace with planted PRD and SAS values.
struct SynthSpec {
    std::string id = "synth";
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t tokens = 16;
    std::size_t answer_count = 3;
    std::size_t path_count = 4; // |S|
    std::size_t dim = 8;
    std::size_t triple_count = 3;
    double alpha_s_target = 0.5;
    double sas_target = 0.5;
    std::uint64_t seed = 42;
    // Store probabilities; otherwise log-scores with masked zeros.
    bool normalized = true;
};

SynthSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

// Throws SpecError for out-of-range targets or impossible shapes.
void check_spec(const SynthSpec& spec);

/// Every answer row puts alpha_s_target uniformly on S and the rest uniformly
/// on the other positions, so PRD = 2 alpha - 1. Each answer hidden state is a
/// rescaled rotation of one triple embedding by arccos(sas_target) inside a
/// plane orthogonal to every other triple, so SAS = sas_target.
trace::TraceExample gen_trace(const SynthSpec& spec);

struct FeatureDataset {
    detector::FeatureTable features; // full feature set
    std::vector<int> labels;         // 1 = hallucinated
    std::vector<std::string> outputs;
};

inline constexpr double kFeatureSigma = 0.05;

/// Two Gaussian clusters in (prd, sas): hallucinated rows shifted up in PRD and
/// down in SAS, cluster means `separation` sigmas apart along each axis.
/// Surface cues come from generated answers whose style depends on the label
/// only when separation > 0. Throws SpecError for n < 10 or a bad fraction.
FeatureDataset gen_feature_dataset(std::size_t n, double separation, std::uint64_t seed,
                                   double positive_fraction = 0.5);

struct QuadrantFixture {
    std::vector<double> prd;
    std::vector<double> sas;
    std::vector<int> labels;
};

inline constexpr double kPlantedMedianPrd = 0.727;
inline constexpr double kPlantedMedianSas = 0.374;

/// 5000 points whose median split lands exactly on 0.727 / 0.374 with
/// quadrant counts 1400/600/2000/1000, hallucination rates 9.5/5.0/22.2/10.9%
/// and quadrant means 0.752/0.701/0.707/0.754 (PRD), 0.421/0.452/0.340/0.344
/// (SAS).
QuadrantFixture planted_quadrant_fixture(std::uint64_t seed = 42);

struct DatasetOptions {
    std::size_t n = 20;
    std::uint64_t seed = 42;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t dim = 16;
    std::size_t k = 20;
    bool with_nli = true;
};

/// Writes a small end-to-end fixture into `dir`: subgraphs.jsonl,
/// traces/ (GGAT1 files plus manifest.jsonl), embeddings.ggat and nli.csv.
/// Traces are aligned with the pruned, linearized prompt of each subgraph.
void gen_dataset(const std::filesystem::path& dir, const DatasetOptions& options = {});

} // namespace gga::synth
