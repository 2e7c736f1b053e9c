#include <gga/metrics.hpp>

#include <gga/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gga::metrics {

namespace {

constexpr double kMinNorm = 1e-12;

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

} // namespace

std::vector<double> softmax_row(std::span<const float> scores) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (float s : scores) {
        if (s > trace::kMaskedScore) max_score = std::max(max_score, static_cast<double>(s));
    }
    std::vector<double> out(scores.size(), 0.0);
    if (!std::isfinite(max_score)) throw AllMaskedError("attention row has no visible positions");
    double total = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] > trace::kMaskedScore) {
            out[j] = std::exp(static_cast<double>(scores[j]) - max_score);
            total += out[j];
        }
    }
    for (auto& v : out) v /= total;
    return out;
}

PrdResult prd(const trace::TraceExample& ex) {
    if (ex.answer_positions.empty()) throw EmptyAnswerError("PRD needs at least one answer position");
    if (ex.path_positions.empty()) throw EmptyPathError("PRD needs at least one shortest-path position");
    trace::check_shapes(ex);

    std::vector<bool> on_path(ex.token_count(), false);
    for (auto j : ex.path_positions) on_path.at(j) = true;

    PrdResult out;
    out.layers = ex.layers;
    out.heads = ex.heads;
    out.per_layer_head.assign(ex.layers * ex.heads, 0.0);
    double total = 0.0;
    for (std::size_t l = 0; l < ex.layers; ++l) {
        for (std::size_t h = 0; h < ex.heads; ++h) {
            double head_sum = 0.0;
            for (std::size_t i = 0; i < ex.answer_count(); ++i) {
                const auto raw = ex.attention_row(l, h, i);
                std::vector<double> weights;
                if (ex.attention_normalized) {
                    weights.assign(raw.begin(), raw.end());
                } else {
                    weights = softmax_row(raw);
                }
                double on = 0.0;
                double off = 0.0;
                for (std::size_t j = 0; j < weights.size(); ++j) (on_path[j] ? on : off) += weights[j];
                // stored rows may sum to 1 +- float rounding; keep each row's term in range
                head_sum += std::clamp(on - off, -1.0, 1.0);
            }
            out.per_layer_head[l * ex.heads + h] = head_sum / static_cast<double>(ex.answer_count());
            total += head_sum;
        }
    }
    out.prd = total / static_cast<double>(ex.layers * ex.heads * ex.answer_count());
    return out;
}

std::vector<double> triple_pool(std::span<const float> hidden, std::size_t dim, const std::vector<bool>& mask) {
    if (dim == 0 || hidden.size() != mask.size() * dim) {
        throw ShapeError("triple_pool: hidden has " + std::to_string(hidden.size()) + " values for " +
                         std::to_string(mask.size()) + " rows of width " + std::to_string(dim));
    }
    std::vector<double> out(dim, 0.0);
    std::size_t kept = 0;
    for (std::size_t r = 0; r < mask.size(); ++r) {
        if (!mask[r]) continue;
        ++kept;
        for (std::size_t c = 0; c < dim; ++c) out[c] += hidden[r * dim + c];
    }
    if (kept == 0) throw AllMaskedError("triple_pool: every row is masked");
    for (auto& v : out) v /= static_cast<double>(kept);
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na < kMinNorm || nb < kMinNorm) throw ZeroVectorError("cosine of a zero-norm vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += (static_cast<double>(a[i]) / na) * (static_cast<double>(b[i]) / nb);
    return std::clamp(dot, -1.0, 1.0);
}

SasResult sas(const trace::TraceExample& ex) {
    if (ex.answer_positions.empty()) throw EmptyAnswerError("SAS needs at least one answer token");
    if (ex.triple_count == 0) throw InputError("SAS needs at least one triple embedding");
    trace::check_shapes(ex);

    // Normalize triple embeddings once.
    std::vector<std::vector<double>> triples(ex.triple_count);
    for (std::size_t n = 0; n < ex.triple_count; ++n) {
        const auto g = ex.triple_row(n);
        const double ng = norm(g);
        if (ng < kMinNorm) throw ZeroVectorError("triple embedding " + std::to_string(n) + " has zero norm");
        triples[n].resize(ex.dim);
        for (std::size_t c = 0; c < ex.dim; ++c) triples[n][c] = g[c] / ng;
    }

    SasResult out;
    out.layer_mismatch = ex.hidden_layer != ex.triple_layer;
    double total = 0.0;
    for (std::size_t t = 0; t < ex.answer_count(); ++t) {
        const auto h = ex.hidden_row(t);
        const double nh = norm(h);
        if (nh < kMinNorm) throw ZeroVectorError("answer hidden state " + std::to_string(t) + " has zero norm");
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t n = 0; n < triples.size(); ++n) {
            double dot = 0.0;
            for (std::size_t c = 0; c < ex.dim; ++c) dot += (h[c] / nh) * triples[n][c];
            dot = std::clamp(dot, -1.0, 1.0);
            if (dot > best) {
                best = dot;
                best_idx = n;
            }
        }
        out.per_token.push_back(best);
        out.argmax_triple.push_back(best_idx);
        total += std::clamp(best, 0.0, 1.0);
    }
    out.sas = total / static_cast<double>(ex.answer_count());
    return out;
}

} // namespace gga::metrics
