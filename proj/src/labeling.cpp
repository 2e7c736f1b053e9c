#include <gga/labeling.hpp>

#include <gga/error.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace gga::labeling {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

std::string_view to_string(Label label) {
    return label == Label::kTruthful ? "truthful" : "hallucinated";
}

Label label_from_string(std::string_view s) {
    if (s == "truthful" || s == "0") return Label::kTruthful;
    if (s == "hallucinated" || s == "1") return Label::kHallucinated;
    throw InputError("unknown label '" + std::string(s) + "'");
}

std::vector<std::string> Normalizer::default_patterns() {
    return {R"(^\s*the answer is\s*:?)", R"(^\s*answer\s*:)", R"(^\s*ans\s*:)"};
}

Normalizer::Normalizer() : Normalizer(default_patterns()) {}

Normalizer::Normalizer(std::span<const std::string> patterns) {
    for (const auto& p : patterns) {
        try {
            patterns_.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
            throw InputError("invalid descriptive pattern '" + p + "': " + e.what());
        }
    }
}

Normalizer Normalizer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open pattern file " + path.string());
    std::vector<std::string> patterns;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) patterns.push_back(line);
    }
    return Normalizer(patterns);
}

std::string Normalizer::pass(std::string s) const {
    s = ascii_lower(s);
    for (bool stripped = true; stripped;) {
        stripped = false;
        for (const auto& re : patterns_) {
            std::smatch m;
            if (std::regex_search(s, m, re, std::regex_constants::match_continuous) && m.length(0) > 0) {
                s.erase(0, static_cast<std::size_t>(m.length(0)));
                stripped = true;
            }
        }
    }
    std::erase_if(s, [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; });

    std::string out;
    for (const auto& tok : split_ws(s)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

std::string Normalizer::operator()(std::string_view s) const {
    // Every pass only lowercases or deletes, so this terminates.
    std::string cur(s);
    for (;;) {
        std::string next = pass(cur);
        if (next == cur) return next;
        cur = std::move(next);
    }
}

std::vector<std::string> extract_answers(std::string_view output_text) {
    const std::string lower = ascii_lower(output_text);
    std::string_view body = output_text;
    if (const auto at = lower.find("ans:"); at != std::string::npos) body = output_text.substr(at + 4);

    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == ',' || body[i] == '|' || body[i] == '\n') {
            auto piece = trim(body.substr(start, i - start));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = i + 1;
        }
    }
    return out;
}

std::string normalize(std::string_view s) {
    static const Normalizer normalizer;
    return normalizer(s);
}

double token_f1(std::string_view prediction, std::string_view gold) {
    const auto p = split_ws(prediction);
    const auto g = split_ws(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    int common = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

LabelResult label(std::string_view output_text, std::span<const std::string> gold_answers, double threshold,
                  const Normalizer& normalizer) {
    if (gold_answers.empty()) throw EmptyGoldError("labeling requires at least one gold answer");
    LabelResult r;
    r.extracted = extract_answers(output_text);
    std::vector<std::string> golds;
    for (const auto& g : gold_answers) golds.push_back(normalizer(g));
    for (const auto& e : r.extracted) {
        const auto pred = normalizer(e);
        for (const auto& g : golds) {
            if (pred == g) r.em = true;
            r.best_f1 = std::max(r.best_f1, token_f1(pred, g));
        }
    }
    r.label = (r.em || r.best_f1 >= threshold) ? Label::kTruthful : Label::kHallucinated;
    return r;
}

} // namespace gga::labeling
