#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <gga/graph.hpp>

namespace gga::linearize {

inline constexpr std::string_view kTriplesPlaceholder = "{TRIPLES}";
inline constexpr std::string_view kQuestionPlaceholder = "{QUESTION}";

// Half-open [start, end) byte offsets into PromptText::text.
struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const CharSpan&) const = default;
};

struct PromptText {
    std::string text;
    std::vector<CharSpan> triple_char_spans;
    CharSpan question_char_span;
};

// Version tag of the built-in prompt template.
std::string_view default_template_version();
std::string_view default_template();
std::string load_template(const std::filesystem::path& path);

// "head relation tail", surface forms as stored.
std::string render_triple(const graph::Triple& t);

/// Substitutes one rendered triple per line for {TRIPLES} and the question for
/// {QUESTION}. Spans refer to the first occurrence of each placeholder; any
/// further occurrences are substituted too.
PromptText linearize(std::span<const graph::Triple> triples, std::string_view question,
                     std::string_view prompt_template = default_template());

} // namespace gga::linearize
