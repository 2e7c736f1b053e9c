#pragma once

#include <filesystem>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gga::labeling {

inline constexpr double kDefaultF1Threshold = 0.3;

enum class Label { kTruthful, kHallucinated };

std::string_view to_string(Label label);
Label label_from_string(std::string_view s);

struct LabelResult {
    Label label = Label::kHallucinated;
    bool em = false;
    double best_f1 = 0.0;
    std::vector<std::string> extracted;
};

// Case-insensitive regexes stripped from the front of an answer after
// lowercasing. Defaults cover "the answer is", "answer:" and "ans:".
class Normalizer {
public:
    Normalizer();
    explicit Normalizer(std::span<const std::string> patterns);

    static Normalizer from_file(const std::filesystem::path& path);
    static std::vector<std::string> default_patterns();

    /// Lowercase, strip descriptive prefixes, drop punctuation, drop the
    /// articles a/an/the, collapse whitespace. Repeated to a fixed point so
    /// the result is idempotent.
    std::string operator()(std::string_view s) const;

private:
    std::string pass(std::string s) const;
    std::vector<std::regex> patterns_;
};

// Text after the first case-insensitive "ans:", split on ',', '|' and newline,
// trimmed, empties dropped. Without the prefix the whole output is one answer.
std::vector<std::string> extract_answers(std::string_view output_text);

std::string normalize(std::string_view s);

// SQuAD bag-of-tokens F1 over whitespace tokens with multiplicity.
double token_f1(std::string_view prediction, std::string_view gold);

/// Truthful iff any extracted answer exactly matches a gold answer after
/// normalization, or the best pairwise token F1 reaches threshold.
/// Throws EmptyGoldError.
LabelResult label(std::string_view output_text, std::span<const std::string> gold_answers,
                  double threshold = kDefaultF1Threshold, const Normalizer& normalizer = Normalizer());

} // namespace gga::labeling
