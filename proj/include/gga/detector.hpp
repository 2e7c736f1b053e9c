#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include <gga/table.hpp>

namespace gga::detector {

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr std::size_t kThresholdGridSize = 50;
inline constexpr double kThresholdMin = 0.1;
inline constexpr double kThresholdMax = 0.9;

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

struct SurfaceFeatures {
    double out_len = 0.0;
    double repetition_ratio = 0.0;
    double avg_word_len = 0.0;
    double unique_word_ratio = 1.0;
    double ans_prefix_flag = 0.0;
    double comma_count = 0.0;
    double qmark_count = 0.0;

    std::vector<double> values() const;
};

// Whitespace-tokenized cues of the generated text.
SurfaceFeatures surface_features(std::string_view output_text);

const std::vector<std::string>& core_feature_names();     // prd, sas
const std::vector<std::string>& surface_feature_names();  // the seven surface cues
const std::vector<std::string>& baseline_feature_names(); // optional baseline columns
// prd, sas, then the surface cues.
std::vector<std::string> full_feature_names();

/// Columns for a named subset: "sas-only", "prd-only", "gga-core", "gga-full",
/// or an explicit comma-separated column list.
std::vector<std::string> subset_columns(std::string_view subset);

// id-keyed numeric table as stored in features.csv.
struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    Matrix values;

    FeatureTable select(std::span<const std::string> columns) const;
};

FeatureTable feature_table_from_csv(const CsvTable& csv);
CsvTable to_csv(const FeatureTable& table);

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

struct ScalerParams {
    std::vector<double> mean;
    std::vector<double> stddev;
    // Zero-variance columns; transformed to 0.
    std::vector<bool> constant;
    double clip_sigma = 3.0;
};

// Population statistics. Throws DegenerateMatrixError for fewer than 2 rows.
ScalerParams fit_scaler(const Matrix& x, double clip_sigma = 3.0);
Matrix transform(const Matrix& x, const ScalerParams& p);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

enum class ModelKind { kGbdt, kLogistic };
ModelKind model_kind_from_string(std::string_view s);
std::string_view to_string(ModelKind kind);

struct GbdtParams {
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    double min_child_weight = 1.0;
    double lambda = 1.0;
    double gamma = 0.0;
    // Weight positives by #neg / #pos.
    bool use_scale_pos_weight = true;
};

struct LogisticParams {
    double c = 1.0;
    double tolerance = 1e-6;
    int max_iter = 200;
    // Class weights n / (2 n_c).
    bool balanced = true;
};

struct TrainParams {
    GbdtParams gbdt;
    LogisticParams logistic;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> row) const;
};

struct DetectorModel {
    ModelKind kind = ModelKind::kGbdt;
    std::vector<std::string> feature_names;
    ScalerParams scaler;
    double threshold = 0.5;
    std::uint64_t seed = kDefaultSeed;

    // gbdt
    GbdtParams gbdt;
    double base_margin = 0.0;
    double scale_pos_weight = 1.0;
    std::vector<Tree> trees;

    // logistic
    LogisticParams logistic;
    std::vector<double> weights;
    double bias = 0.0;
    int iterations = 0;

    std::size_t feature_count() const { return feature_names.size(); }
};

nlohmann::json to_json(const DetectorModel& m);
DetectorModel model_from_json(const nlohmann::json& j);
// Pretty-printed JSON, stable across runs.
std::string serialize(const DetectorModel& m);

/// Fits the scaler, the classifier and the decision threshold (grid search on
/// the training predictions). Labels are 1 = hallucinated, 0 = truthful.
///
/// Throws SingleClassError, InputError (non-finite X, non-binary y, size
/// mismatch).
DetectorModel train(const Matrix& x, std::span<const int> y, ModelKind kind, const TrainParams& params = {},
                    std::uint64_t seed = kDefaultSeed, std::vector<std::string> feature_names = {});

// Probabilities of class 1 on raw (unscaled) features. Throws ShapeError.
std::vector<double> predict_proba(const DetectorModel& m, const Matrix& x);

// The model's margin before the logistic link, on already scaled features.
double raw_margin(const DetectorModel& m, std::span<const double> scaled_row);

// ---------------------------------------------------------------------------
// Thresholds and metrics
// ---------------------------------------------------------------------------

// 50 evenly spaced points from 0.1 to 0.9 inclusive.
const std::vector<double>& threshold_grid();

// Class-1 F1 maximizing grid threshold; ties go to the smaller threshold.
// Predictions are positive when prob >= threshold. Throws SingleClassError.
double threshold_search(std::span<const double> probs, std::span<const int> y);

struct EvalMetrics {
    std::optional<double> auc; // absent when only one class is present
    double f1_class1 = 0.0;
    double f1_class0 = 0.0;
    double f1_macro = 0.0;
    double precision_class1 = 0.0;
    double recall_class1 = 0.0;
    double threshold = 0.5;
    std::size_t n = 0;
    std::size_t positives = 0;
};

nlohmann::json to_json(const EvalMetrics& m);

// Mann-Whitney AUC with average ranks for ties. Throws SingleClassError.
double roc_auc(std::span<const double> probs, std::span<const int> y);

EvalMetrics evaluate(std::span<const double> probs, std::span<const int> y, double threshold);

// Fold index per row: each class shuffled with the seed, then dealt round-robin
// with one counter shared across classes. Throws StratificationError.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds, std::uint64_t seed);

struct FoldResult {
    std::vector<std::size_t> test_indices;
    std::vector<double> test_probs;
    double threshold = 0.5;
    EvalMetrics metrics;
};

struct CvResult {
    std::vector<FoldResult> folds;
    EvalMetrics mean;
};

nlohmann::json to_json(const CvResult& cv);

// Scaler, model and threshold are refit on each training split only.
CvResult cross_validate(const Matrix& x, std::span<const int> y, std::size_t folds, ModelKind kind,
                        const TrainParams& params = {}, std::uint64_t seed = kDefaultSeed);

} // namespace gga::detector
