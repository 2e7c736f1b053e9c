#include <gga/baselines.hpp>

#include <gga/error.hpp>
#include <gga/trace.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

namespace gga::baselines {

namespace {

constexpr double kMinNorm = 1e-12;

void require_non_empty(std::span<const float> v, const char* what) {
    if (v.empty()) throw EmptySequenceError(std::string(what) + " needs at least one generated token");
}

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

// Rows of a [rows][dim] matrix, each scaled to unit length.
std::vector<std::vector<double>> unit_rows(std::span<const float> m, std::size_t dim, const char* what) {
    if (dim == 0 || m.empty() || m.size() % dim != 0) {
        throw ShapeError(std::string(what) + " must be a non-empty [rows][d] matrix");
    }
    std::vector<std::vector<double>> out(m.size() / dim, std::vector<double>(dim));
    for (std::size_t r = 0; r < out.size(); ++r) {
        const auto row = m.subspan(r * dim, dim);
        const double n = norm(row);
        if (n < kMinNorm) throw ZeroVectorError(std::string(what) + " row " + std::to_string(r) + " has zero norm");
        for (std::size_t c = 0; c < dim; ++c) out[r][c] = row[c] / n;
    }
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Mean over rows of `from` of the best cosine against any row of `to`.
double greedy_match(const std::vector<std::vector<double>>& from, const std::vector<std::vector<double>>& to) {
    double total = 0.0;
    for (const auto& f : from) {
        double best = -1.0;
        for (const auto& t : to) best = std::max(best, dot(f, t));
        total += best;
    }
    return total / static_cast<double>(from.size());
}

std::vector<double> softmax(std::span<const float> v) {
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) total += out[i] = std::exp(v[i] - m);
    for (auto& x : out) x /= total;
    return out;
}

} // namespace

double perplexity(std::span<const float> token_logprobs) {
    require_non_empty(token_logprobs, "perplexity");
    double sum = 0.0;
    for (float lp : token_logprobs) {
        if (!(lp <= 0.0F)) throw InputError("log-probabilities must be <= 0");
        sum += lp;
    }
    const double neg_mean = -sum / static_cast<double>(token_logprobs.size());
    const double ppl = neg_mean >= std::log(kPerplexityMax) ? kPerplexityMax : std::exp(neg_mean);
    return std::log(std::clamp(ppl, kPerplexityMin, kPerplexityMax));
}

double token_confidence(std::span<const float> token_maxprobs) {
    require_non_empty(token_maxprobs, "token_confidence");
    const double mean = std::accumulate(token_maxprobs.begin(), token_maxprobs.end(), 0.0) /
                        static_cast<double>(token_maxprobs.size());
    return std::clamp(mean, kTokenConfMin, kTokenConfMax);
}

double max_token_probability(std::span<const float> token_maxprobs) {
    require_non_empty(token_maxprobs, "max_token_probability");
    const double best = *std::max_element(token_maxprobs.begin(), token_maxprobs.end());
    return std::clamp(best, kMaxProbMin, kMaxProbMax);
}

double bertscore_f1(std::span<const float> candidate, std::span<const float> reference, std::size_t dim) {
    const auto cand = unit_rows(candidate, dim, "candidate embeddings");
    const auto ref = unit_rows(reference, dim, "reference embeddings");
    const double precision = greedy_match(cand, ref);
    const double recall = greedy_match(ref, cand);
    if (precision + recall <= 0.0) return 0.0;
    return std::clamp(2.0 * precision * recall / (precision + recall), 0.0, 1.0);
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("jensen_shannon: length mismatch");
    double js = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
    }
    return std::clamp(js / std::numbers::ln2, 0.0, 1.0);
}

DivergenceTerms divergence_terms(std::span<const float> question, std::span<const float> answer) {
    if (question.empty() || question.size() != answer.size()) {
        throw ShapeError("embedding_divergence: vectors must be non-empty and equally sized");
    }
    const double nq = norm(question);
    const double na = norm(answer);
    if (nq < kMinNorm || na < kMinNorm) throw ZeroVectorError("embedding_divergence: zero-norm embedding");

    double d = 0.0;
    double diff2 = 0.0;
    for (std::size_t i = 0; i < question.size(); ++i) {
        d += static_cast<double>(question[i]) * answer[i];
        const double delta = static_cast<double>(question[i]) - answer[i];
        diff2 += delta * delta;
    }
    const double cosine = std::clamp(d / (nq * na), -1.0, 1.0);
    const double dim = static_cast<double>(question.size());

    DivergenceTerms t;
    t.cos = std::clamp(1.0 - cosine, 0.0, 1.0);
    t.euc = std::min(std::sqrt(diff2) / (2.0 * std::sqrt(dim)), 1.0);
    t.angle = std::acos(cosine) / std::numbers::pi;
    const auto p = softmax(question);
    const auto q = softmax(answer);
    t.js = jensen_shannon(p, q);
    return t;
}

double combine(const DivergenceTerms& t, const DivergenceWeights& w) {
    return w.cos * t.cos + w.euc * t.euc + w.angle * t.angle + w.js * t.js;
}

double embedding_divergence(std::span<const float> question, std::span<const float> answer,
                            const DivergenceWeights& weights) {
    return combine(divergence_terms(question, answer), weights);
}

double enhance_contradiction(double p) {
    if (p > 0.5) return std::clamp(0.5 + (p - 0.5) * 1.5, 0.0, 1.0);
    if (p < 0.5) return std::clamp(p * 0.8, 0.0, 1.0);
    return p;
}

ReferenceSource reference_source_from_string(const std::string& s) {
    if (s == "question") return ReferenceSource::kQuestion;
    if (s == "gold") return ReferenceSource::kGold;
    throw InputError("reference source must be 'question' or 'gold', got '" + s + "'");
}

std::string to_string(ReferenceSource s) { return s == ReferenceSource::kQuestion ? "question" : "gold"; }

namespace {

struct NamedTensor {
    const char* name;
    std::vector<float> EmbeddingEntry::*member;
    bool matrix;
};

constexpr NamedTensor kTensors[] = {
    {"answer", &EmbeddingEntry::answer, false},
    {"answer_tokens", &EmbeddingEntry::answer_tokens, true},
    {"question", &EmbeddingEntry::question, false},
    {"question_tokens", &EmbeddingEntry::question_tokens, true},
    {"gold", &EmbeddingEntry::gold, false},
    {"gold_tokens", &EmbeddingEntry::gold_tokens, true},
};

} // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
    nlohmann::json entries = nlohmann::json::array();
    std::vector<std::span<const float>> tensors;
    for (const auto& [id, e] : table) {
        if (e.dim == 0) throw ShapeError("embedding entry '" + id + "' has d = 0");
        nlohmann::json shapes = nlohmann::json::array();
        for (const auto& t : kTensors) {
            const auto& v = e.*(t.member);
            if (v.empty()) continue;
            if (v.size() % e.dim != 0 || (!t.matrix && v.size() != e.dim)) {
                throw ShapeError("embedding '" + std::string(t.name) + "' of '" + id + "' does not match d");
            }
            shapes.push_back(t.matrix ? nlohmann::json{t.name, {v.size() / e.dim, e.dim}}
                                      : nlohmann::json{t.name, {e.dim}});
            tensors.emplace_back(v);
        }
        entries.push_back({{"id", id}, {"d", e.dim}, {"tensors", shapes}});
    }
    const nlohmann::json header = {{"kind", "embeddings"}, {"format_version", trace::kFormatVersion}, {"entries", entries}};
    trace::write_bytes(path, trace::encode_container(header, tensors));
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    const auto bytes = trace::read_bytes(path);
    const auto c = trace::decode_container(bytes);
    if (c.header.value("kind", std::string{}) != "embeddings") {
        throw FormatError(path.string() + " is not an embeddings container");
    }
    EmbeddingTable table;
    std::size_t offset = 0;
    try {
        for (const auto& j : c.header.at("entries")) {
            EmbeddingEntry e;
            e.id = j.at("id").get<std::string>();
            e.dim = j.at("d").get<std::size_t>();
            for (const auto& shape : j.at("tensors")) {
                const auto name = shape.at(0).get<std::string>();
                std::size_t count = 1;
                for (const auto& d : shape.at(1)) count *= d.get<std::size_t>();
                const auto* t = std::find_if(std::begin(kTensors), std::end(kTensors),
                                             [&](const NamedTensor& n) { return name == n.name; });
                if (t == std::end(kTensors)) throw FormatError("unknown embedding tensor '" + name + "'");
                e.*(t->member) = trace::read_f32(c.payload, offset, count, e.id + "/" + name);
            }
            const auto id = e.id;
            table.emplace(id, std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed embeddings header: ") + ex.what());
    }
    if (offset != c.payload.size()) throw ShapeError("embeddings payload longer than declared shapes");
    return table;
}

} // namespace gga::baselines
