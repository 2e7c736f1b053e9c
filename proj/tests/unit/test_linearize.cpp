#include <gga/error.hpp>
#include <gga/linearize.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

using gga::TemplateError;
using namespace gga::linearize;
using gga::graph::Triple;

TEST(Linearize, RendersUnderscoredSurfaceForms) {
    EXPECT_EQ(render_triple({"Conspiracy", "release_year", "2001"}), "Conspiracy release_year 2001");
    const std::vector<Triple> t{{"Conspiracy", "release_year", "2001"}};
    const auto p = gga::linearize::linearize(t, "when was Conspiracy released");
    EXPECT_NE(p.text.find("\nConspiracy release_year 2001\n"), std::string::npos);
}

TEST(Linearize, SpansSliceBackToTriples) {
    const std::vector<Triple> t{{"a", "r1", "b"}, {"Film_100", "directed_by", "Person_3"}, {"x", "y", "z"}};
    const auto p = gga::linearize::linearize(t, "who directed Film_100");
    ASSERT_EQ(p.triple_char_spans.size(), 3U);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto [s, e] = p.triple_char_spans[i];
        EXPECT_EQ(p.text.substr(s, e - s), render_triple(t[i]));
        if (i > 0) {
            EXPECT_EQ(p.text[s - 1], '\n');
            EXPECT_GT(s, p.triple_char_spans[i - 1].end);
        }
    }
    const auto [qs, qe] = p.question_char_span;
    EXPECT_EQ(p.text.substr(qs, qe - qs), "who directed Film_100");
    EXPECT_LE(qe, p.text.size());
}

TEST(Linearize, RepeatedTriplesGetTheirOwnSpans) {
    const std::vector<Triple> t{{"a", "r", "b"}, {"a", "r", "b"}};
    const auto p = gga::linearize::linearize(t, "q");
    ASSERT_EQ(p.triple_char_spans.size(), 2U);
    EXPECT_NE(p.triple_char_spans[0], p.triple_char_spans[1]);
}

TEST(Linearize, EmptyQuestionGivesZeroLengthSpan) {
    const std::vector<Triple> t{{"a", "r", "b"}};
    const auto p = gga::linearize::linearize(t, "");
    EXPECT_EQ(p.question_char_span.start, p.question_char_span.end);
}

TEST(Linearize, CustomTemplate) {
    const std::vector<Triple> t{{"a", "r", "b"}, {"c", "s", "d"}};
    const auto p = gga::linearize::linearize(t, "Q?", "[{TRIPLES}] {QUESTION}");
    EXPECT_EQ(p.text, "[a r b\nc s d] Q?");
    EXPECT_EQ(p.question_char_span, (CharSpan{14, 16}));
}

TEST(Linearize, MissingPlaceholderIsTemplateError) {
    const std::vector<Triple> t{{"a", "r", "b"}};
    EXPECT_THROW(gga::linearize::linearize(t, "q", "no placeholders"), TemplateError);
    EXPECT_THROW(gga::linearize::linearize(t, "q", "{TRIPLES} only"), TemplateError);
    EXPECT_THROW(gga::linearize::linearize(t, "q", "{QUESTION} only"), TemplateError);
}

TEST(Linearize, DefaultTemplateIsVersioned) {
    EXPECT_EQ(default_template_version(), "v1");
    EXPECT_NE(default_template().find("{TRIPLES}"), std::string_view::npos);
    EXPECT_NE(default_template().find("ans:"), std::string_view::npos);
}

TEST(Linearize, LoadTemplate) {
    testutil::TempDir dir;
    std::ofstream(dir / "t.txt") << "{QUESTION}|{TRIPLES}";
    EXPECT_EQ(load_template(dir / "t.txt"), "{QUESTION}|{TRIPLES}");
    EXPECT_THROW(load_template(dir / "missing.txt"), TemplateError);
}
