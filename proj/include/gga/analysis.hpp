#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gga::analysis {

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0; // two-sided
};

double mean(std::span<const double> v);
// Unbiased (n - 1) variance.
double sample_variance(std::span<const double> v);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

/// Pooled-variance two-sample t-test, df = |a| + |b| - 2.
/// Throws DegenerateSampleError (fewer than 2 values, zero pooled variance).
TTestResult t_test(std::span<const double> a, std::span<const double> b);

// (mean_a - mean_b) / pooled standard deviation.
double cohens_d(std::span<const double> a, std::span<const double> b);

// Throws InputError on length mismatch or n < 2, ConstantSeriesError.
double pearson_r(std::span<const double> x, std::span<const double> y);

// Midpoint rule for even n. Throws InputError when empty.
double median(std::span<const double> v);

enum class Quadrant { kQ1 = 1, kQ2 = 2, kQ3 = 3, kQ4 = 4 };

// Q1 high/high, Q2 low PRD high SAS, Q3 low/low, Q4 high PRD low SAS.
// High means strictly above the median.
Quadrant quadrant_of(double prd, double sas, double median_prd, double median_sas);

struct QuadrantStats {
    std::size_t count = 0;
    std::size_t hallucinated = 0;
    // Unset for an empty quadrant.
    std::optional<double> hallucination_rate;
    std::optional<double> mean_prd;
    std::optional<double> mean_sas;
};

struct QuadrantTable {
    double median_prd = 0.0;
    double median_sas = 0.0;
    std::array<QuadrantStats, 4> quadrants; // Q1..Q4

    const QuadrantStats& at(Quadrant q) const { return quadrants[static_cast<int>(q) - 1]; }
};

// labels: 1 = hallucinated. Throws InputError on length mismatch or n < 4.
QuadrantTable quadrant_analysis(std::span<const double> prd, std::span<const double> sas, std::span<const int> labels);

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0; // sample
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Quartiles by linear interpolation between order statistics.
Summary summarize(std::span<const double> v);

struct FeatureComparison {
    std::string feature;
    Summary truthful;
    Summary hallucinated;
    // truthful minus hallucinated
    std::optional<TTestResult> t_test;
    std::optional<double> cohens_d;
    // against the 0/1 hallucination label
    std::optional<double> label_r;
};

struct AnalysisReport {
    std::size_t n = 0;
    std::size_t hallucinated = 0;
    std::vector<FeatureComparison> features; // prd, sas
    std::optional<double> prd_sas_r;
    QuadrantTable quadrants;
};

/// Group comparisons, correlations and the quadrant table. Statistics that are
/// undefined for the data at hand (single class, constant series) are left
/// unset instead of failing the whole report.
AnalysisReport analyze(std::span<const double> prd, std::span<const double> sas, std::span<const int> labels);

nlohmann::json to_json(const TTestResult& t);
nlohmann::json to_json(const QuadrantTable& q);
nlohmann::json to_json(const AnalysisReport& r);

} // namespace gga::analysis
