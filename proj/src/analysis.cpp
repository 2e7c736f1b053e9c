#include <gga/analysis.hpp>

#include <gga/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gga::analysis {

double mean(std::span<const double> v) {
    if (v.empty()) throw InputError("mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw DegenerateSampleError("variance needs at least 2 values");
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

namespace {

// Lentz's method for the continued fraction of I_x(a, b).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("incomplete_beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw InputError("incomplete_beta needs x in [0, 1]");
    if (x == 0.0 || x == 1.0) return x;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // Use the symmetry relation where the fraction converges fastest.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0.0)) throw InputError("degrees of freedom must be positive");
    if (std::isnan(t)) return std::nan("");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

namespace {

double pooled_variance(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw DegenerateSampleError("each sample needs at least 2 values");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
    if (!(pooled > 0.0)) throw DegenerateSampleError("pooled variance is zero");
    return pooled;
}

} // namespace

TTestResult t_test(std::span<const double> a, std::span<const double> b) {
    const double sp2 = pooled_variance(a, b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    TTestResult r;
    r.df = na + nb - 2.0;
    r.t = (mean(a) - mean(b)) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
    r.p = student_t_two_sided(r.t, r.df);
    return r;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
    return (mean(a) - mean(b)) / std::sqrt(pooled_variance(a, b));
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("pearson_r: series differ in length");
    if (x.size() < 2) throw InputError("pearson_r needs at least 2 points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw ConstantSeriesError("pearson_r: constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double median(std::span<const double> v) {
    if (v.empty()) throw InputError("median of an empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : s[n / 2 - 1] + (s[n / 2] - s[n / 2 - 1]) / 2.0;
}

Quadrant quadrant_of(double prd, double sas, double median_prd, double median_sas) {
    const bool high_prd = prd > median_prd;
    const bool high_sas = sas > median_sas;
    if (high_prd && high_sas) return Quadrant::kQ1;
    if (!high_prd && high_sas) return Quadrant::kQ2;
    if (!high_prd && !high_sas) return Quadrant::kQ3;
    return Quadrant::kQ4;
}

QuadrantTable quadrant_analysis(std::span<const double> prd, std::span<const double> sas, std::span<const int> labels) {
    if (prd.size() != sas.size() || prd.size() != labels.size()) {
        throw InputError("quadrant_analysis: inputs differ in length");
    }
    if (prd.size() < 4) throw InputError("quadrant_analysis needs at least 4 points");
    QuadrantTable table;
    table.median_prd = median(prd);
    table.median_sas = median(sas);
    std::array<double, 4> prd_sum{};
    std::array<double, 4> sas_sum{};
    for (std::size_t i = 0; i < prd.size(); ++i) {
        const auto q = static_cast<std::size_t>(quadrant_of(prd[i], sas[i], table.median_prd, table.median_sas)) - 1;
        auto& s = table.quadrants[q];
        ++s.count;
        if (labels[i] == 1) ++s.hallucinated;
        prd_sum[q] += prd[i];
        sas_sum[q] += sas[i];
    }
    for (std::size_t q = 0; q < 4; ++q) {
        auto& s = table.quadrants[q];
        if (s.count == 0) continue;
        const double n = static_cast<double>(s.count);
        s.hallucination_rate = static_cast<double>(s.hallucinated) / n;
        s.mean_prd = prd_sum[q] / n;
        s.mean_sas = sas_sum[q] / n;
    }
    return table;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (s[hi] - s[lo]) * (pos - static_cast<double>(lo));
}

} // namespace

Summary summarize(std::span<const double> v) {
    Summary s;
    s.n = v.size();
    if (v.empty()) return s;
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    s.mean = mean(v);
    s.stddev = v.size() > 1 ? std::sqrt(sample_variance(v)) : 0.0;
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = median(v);
    s.q3 = quantile_sorted(sorted, 0.75);
    return s;
}

namespace {

template <class F>
auto try_stat(F&& f) -> std::optional<decltype(f())> {
    try {
        return f();
    } catch (const DegenerateSampleError&) {
    } catch (const ConstantSeriesError&) {
    } catch (const InputError&) {
    }
    return std::nullopt;
}

} // namespace

AnalysisReport analyze(std::span<const double> prd, std::span<const double> sas, std::span<const int> labels) {
    if (prd.size() != sas.size() || prd.size() != labels.size()) throw InputError("analyze: inputs differ in length");
    AnalysisReport r;
    r.n = labels.size();
    r.hallucinated = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    std::vector<double> y(labels.begin(), labels.end());

    const std::pair<const char*, std::span<const double>> columns[] = {{"prd", prd}, {"sas", sas}};
    for (const auto& [name, values] : columns) {
        std::vector<double> truthful;
        std::vector<double> hallucinated;
        for (std::size_t i = 0; i < values.size(); ++i) (labels[i] == 1 ? hallucinated : truthful).push_back(values[i]);
        FeatureComparison c;
        c.feature = name;
        c.truthful = summarize(truthful);
        c.hallucinated = summarize(hallucinated);
        c.t_test = try_stat([&] { return t_test(truthful, hallucinated); });
        c.cohens_d = try_stat([&] { return cohens_d(truthful, hallucinated); });
        c.label_r = try_stat([&] { return pearson_r(values, y); });
        r.features.push_back(std::move(c));
    }
    r.prd_sas_r = try_stat([&] { return pearson_r(prd, sas); });
    r.quadrants = quadrant_analysis(prd, sas, labels);
    return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json to_json(const Summary& s) {
    return {{"n", s.n},   {"mean", s.mean},     {"std", s.stddev}, {"min", s.min},
            {"q1", s.q1}, {"median", s.median}, {"q3", s.q3},      {"max", s.max}};
}

} // namespace

nlohmann::json to_json(const TTestResult& t) { return {{"t", t.t}, {"df", t.df}, {"p", t.p}}; }

nlohmann::json to_json(const QuadrantTable& q) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& s = q.quadrants[i];
        rows.push_back({{"quadrant", "Q" + std::to_string(i + 1)},
                        {"count", s.count},
                        {"hallucinated", s.hallucinated},
                        {"hallucination_rate", opt(s.hallucination_rate)},
                        {"mean_prd", opt(s.mean_prd)},
                        {"mean_sas", opt(s.mean_sas)}});
    }
    return {{"median_prd", q.median_prd}, {"median_sas", q.median_sas}, {"quadrants", rows}};
}

nlohmann::json to_json(const AnalysisReport& r) {
    nlohmann::json features = nlohmann::json::object();
    for (const auto& c : r.features) {
        features[c.feature] = {
            {"truthful", to_json(c.truthful)},
            {"hallucinated", to_json(c.hallucinated)},
            {"t_test", c.t_test ? to_json(*c.t_test) : nlohmann::json(nullptr)},
            {"cohens_d", opt(c.cohens_d)},
            {"label_r", opt(c.label_r)},
        };
    }
    return {{"n", r.n},
            {"hallucinated", r.hallucinated},
            {"features", features},
            {"prd_sas_r", opt(r.prd_sas_r)},
            {"quadrants", to_json(r.quadrants)}};
}

} // namespace gga::analysis
