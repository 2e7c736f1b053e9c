#include <gga/linearize.hpp>

#include <gga/error.hpp>

#include <fstream>
#include <sstream>

#include "prompt_template.inc"

namespace gga::linearize {

std::string_view default_template_version() { return "v1"; }

std::string_view default_template() { return kDefaultPromptTemplate; }

std::string load_template(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot read template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string render_triple(const graph::Triple& t) {
    return t.head + " " + t.relation + " " + t.tail;
}

PromptText linearize(std::span<const graph::Triple> triples, std::string_view question,
                     std::string_view prompt_template) {
    if (prompt_template.find(kTriplesPlaceholder) == std::string_view::npos ||
        prompt_template.find(kQuestionPlaceholder) == std::string_view::npos) {
        throw TemplateError("template must contain {TRIPLES} and {QUESTION}");
    }

    PromptText out;
    bool triples_done = false;
    bool question_done = false;
    std::size_t pos = 0;
    while (pos < prompt_template.size()) {
        const auto rest = prompt_template.substr(pos);
        if (rest.starts_with(kTriplesPlaceholder)) {
            for (std::size_t i = 0; i < triples.size(); ++i) {
                if (i > 0) out.text += '\n';
                const std::size_t start = out.text.size();
                out.text += render_triple(triples[i]);
                if (!triples_done) out.triple_char_spans.push_back({start, out.text.size()});
            }
            triples_done = true;
            pos += kTriplesPlaceholder.size();
        } else if (rest.starts_with(kQuestionPlaceholder)) {
            const std::size_t start = out.text.size();
            out.text += question;
            if (!question_done) out.question_char_span = {start, out.text.size()};
            question_done = true;
            pos += kQuestionPlaceholder.size();
        } else {
            out.text += prompt_template[pos++];
        }
    }
    return out;
}

} // namespace gga::linearize
