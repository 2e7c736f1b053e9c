#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gga::baselines {

inline constexpr double kPerplexityMin = 1.0;
inline constexpr double kPerplexityMax = 10000.0;
inline constexpr double kTokenConfMin = 0.2;
inline constexpr double kTokenConfMax = 0.95;
inline constexpr double kMaxProbMin = 0.4;
inline constexpr double kMaxProbMax = 0.95;

struct BaselineRow {
    double perplexity_log = 0.0;
    double token_conf = 0.0;
    double max_token_prob = 0.0;
    std::optional<double> bertscore_f1;
    std::optional<double> embed_div;
    std::optional<double> nli_contra;
};

// log of exp(-mean logprob) clipped to [1, 10000]. Throws EmptySequenceError,
// InputError for positive log-probabilities.
double perplexity(std::span<const float> token_logprobs);

// Mean max-probability clipped to [0.2, 0.95].
double token_confidence(std::span<const float> token_maxprobs);

// Global max probability clipped to [0.4, 0.95].
double max_token_probability(std::span<const float> token_maxprobs);

/// Greedy-matching BERTScore F1 over token embeddings ([m][dim], [n][dim]):
/// precision averages each candidate token's best cosine against the
/// references, recall the converse. Clamped to [0, 1].
double bertscore_f1(std::span<const float> candidate, std::span<const float> reference, std::size_t dim);

struct DivergenceTerms {
    double cos = 0.0;   // 1 - cosine, clamped to [0, 1]
    double euc = 0.0;   // min(|q - a| / (2 sqrt d), 1)
    double angle = 0.0; // arccos(cosine) / pi
    double js = 0.0;    // base-2 Jensen-Shannon of the softmaxed vectors
};

struct DivergenceWeights {
    double cos = 0.4;
    double euc = 0.2;
    double angle = 0.2;
    double js = 0.2;
};

DivergenceTerms divergence_terms(std::span<const float> question, std::span<const float> answer);
double combine(const DivergenceTerms& terms, const DivergenceWeights& weights = {});

// Weighted sum of the four terms. Throws ZeroVectorError, ShapeError.
double embedding_divergence(std::span<const float> question, std::span<const float> answer,
                            const DivergenceWeights& weights = {});

// Base-2 Jensen-Shannon divergence of two probability vectors, in [0, 1].
double jensen_shannon(std::span<const double> p, std::span<const double> q);

// Contrast enhancement for an externally computed contradiction probability:
// values above 0.5 are stretched by 1.5 around 0.5, values below are scaled by 0.8.
double enhance_contradiction(double p);

// Which text the semantic baselines compare the generated answer against.
enum class ReferenceSource { kQuestion, kGold };
ReferenceSource reference_source_from_string(const std::string& s);
std::string to_string(ReferenceSource s);

// Embeddings file: GGAT1 container whose header lists, per id, the shapes of
// its tensors. Pooled vectors have shape [d], token matrices [m, d].
struct EmbeddingEntry {
    std::string id;
    std::size_t dim = 0;
    std::vector<float> answer;
    std::vector<float> question;
    std::vector<float> gold;
    std::vector<float> answer_tokens;
    std::vector<float> question_tokens;
    std::vector<float> gold_tokens;
};

using EmbeddingTable = std::map<std::string, EmbeddingEntry>;

EmbeddingTable read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

} // namespace gga::baselines
