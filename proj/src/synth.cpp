#include <gga/synth.hpp>

#include <gga/baselines.hpp>
#include <gga/error.hpp>
#include <gga/graph.hpp>
#include <gga/linearize.hpp>
#include <gga/rng.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace gga::synth {

SynthSpec spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    try {
        s.id = j.value("id", s.id);
        s.layers = j.value("L", s.layers);
        s.heads = j.value("H", s.heads);
        s.tokens = j.value("T", s.tokens);
        s.answer_count = j.value("A", s.answer_count);
        s.path_count = j.value("path_count", s.path_count);
        s.dim = j.value("d", s.dim);
        s.triple_count = j.value("N", s.triple_count);
        s.alpha_s_target = j.value("alpha_s_target", s.alpha_s_target);
        s.sas_target = j.value("sas_target", s.sas_target);
        s.seed = j.value("seed", s.seed);
        s.normalized = j.value("normalized", s.normalized);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed synth spec: ") + e.what());
    }
    return s;
}

nlohmann::json to_json(const SynthSpec& s) {
    return {{"id", s.id},
            {"L", s.layers},
            {"H", s.heads},
            {"T", s.tokens},
            {"A", s.answer_count},
            {"path_count", s.path_count},
            {"d", s.dim},
            {"N", s.triple_count},
            {"alpha_s_target", s.alpha_s_target},
            {"sas_target", s.sas_target},
            {"seed", s.seed},
            {"normalized", s.normalized}};
}

void check_spec(const SynthSpec& s) {
    if (s.id.empty()) throw SpecError("id must be non-empty");
    if (s.layers == 0 || s.heads == 0) throw SpecError("L and H must be positive");
    if (s.answer_count == 0) throw SpecError("|A| must be at least 1");
    if (s.path_count == 0) throw SpecError("|S| must be at least 1");
    if (s.answer_count + s.path_count > s.tokens) throw SpecError("|A| + |S| exceeds T");
    if (s.triple_count == 0) throw SpecError("N must be at least 1");
    if (s.dim < (s.triple_count == 1 ? 2u : 3u)) throw SpecError("d too small for the SAS construction");
    if (!(s.alpha_s_target >= 0.0 && s.alpha_s_target <= 1.0)) throw SpecError("alpha_s_target must lie in [0, 1]");
    if (!(s.sas_target >= 0.0 && s.sas_target <= 1.0)) throw SpecError("sas_target must lie in [0, 1]");
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) { return std::inner_product(a.begin(), a.end(), b.begin(), 0.0); }

// Random unit vector orthogonal to every vector in `against` (assumed orthonormal).
Vec random_orthogonal(Rng& rng, std::size_t d, const std::vector<Vec>& against) {
    for (;;) {
        Vec v(d);
        for (auto& x : v) x = rng.normal();
        for (const auto& b : against) {
            const double p = dot(v, b);
            for (std::size_t i = 0; i < d; ++i) v[i] -= p * b[i];
        }
        const double n = std::sqrt(dot(v, v));
        if (n < 1e-6) continue;
        for (auto& x : v) x /= n;
        return v;
    }
}

std::size_t flat_index(const trace::TraceExample& ex, std::size_t l, std::size_t h, std::size_t i) {
    return ((l * ex.heads + h) * ex.answer_count() + i) * ex.token_count();
}

// Fills every answer row with `alpha(l, h)` spread evenly on S and the rest
// spread evenly on the other visible positions. With `causal`, positions after
// the answer token itself are invisible.
template <class AlphaFn>
void fill_attention(trace::TraceExample& ex, AlphaFn alpha, bool causal) {
    const std::size_t t = ex.token_count();
    std::vector<bool> in_s(t, false);
    for (auto p : ex.path_positions) in_s[p] = true;
    ex.attention.assign(ex.layers * ex.heads * ex.answer_count() * t, 0.0F);
    for (std::size_t l = 0; l < ex.layers; ++l) {
        for (std::size_t h = 0; h < ex.heads; ++h) {
            const double a = alpha(l, h);
            for (std::size_t i = 0; i < ex.answer_count(); ++i) {
                const std::size_t visible = causal ? ex.answer_positions[i] + 1 : t;
                std::size_t s_count = 0;
                for (std::size_t p = 0; p < visible; ++p) s_count += in_s[p] ? 1 : 0;
                const std::size_t rest = visible - s_count;
                if (rest == 0 && a < 1.0) throw SpecError("no positions outside S to carry the remaining mass");
                if (s_count == 0) throw SpecError("no visible path position");
                float* row = ex.attention.data() + flat_index(ex, l, h, i);
                for (std::size_t p = 0; p < t; ++p) {
                    double w = 0.0;
                    if (p < visible) w = in_s[p] ? a / static_cast<double>(s_count) : (1.0 - a) / static_cast<double>(rest);
                    if (ex.attention_normalized) {
                        row[p] = static_cast<float>(w);
                    } else {
                        row[p] = w > 0.0 ? static_cast<float>(std::log(w)) : trace::kMaskedScore;
                    }
                }
            }
        }
    }
}

// Triple rows share a vector when `group` maps them to the same id. The answer
// hidden states sit at angle arccos(sas) from the target group's vector.
void fill_embeddings(trace::TraceExample& ex, Rng& rng, const std::vector<std::size_t>& group, std::size_t target,
                     double sas) {
    const std::size_t d = ex.dim;
    const Vec e = random_orthogonal(rng, d, {});
    const Vec u = random_orthogonal(rng, d, {e});
    const std::size_t groups = *std::max_element(group.begin(), group.end()) + 1;
    std::vector<Vec> vecs(groups);
    std::vector<double> scale(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        vecs[g] = g == target ? e : random_orthogonal(rng, d, {e, u});
        scale[g] = rng.uniform(0.5, 2.0);
    }
    ex.triple_count = group.size();
    ex.triple_embeddings.clear();
    for (auto g : group) {
        for (std::size_t k = 0; k < d; ++k) ex.triple_embeddings.push_back(static_cast<float>(scale[g] * vecs[g][k]));
    }
    const double c = sas;
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    ex.answer_hidden.clear();
    for (std::size_t i = 0; i < ex.answer_count(); ++i) {
        const double r = rng.uniform(0.5, 2.0);
        for (std::size_t k = 0; k < d; ++k) ex.answer_hidden.push_back(static_cast<float>(r * (c * e[k] + s * u[k])));
    }
}

} // namespace

trace::TraceExample gen_trace(const SynthSpec& spec) {
    check_spec(spec);
    Rng rng(spec.seed);
    trace::TraceExample ex;
    ex.id = spec.id;
    ex.layers = spec.layers;
    ex.heads = spec.heads;
    ex.dim = spec.dim;
    ex.attention_normalized = spec.normalized;
    for (std::size_t i = 0; i < spec.tokens; ++i) ex.tokens.push_back("tok" + std::to_string(i));

    const std::size_t prompt_len = spec.tokens - spec.answer_count;
    for (std::size_t i = prompt_len; i < spec.tokens; ++i) ex.answer_positions.push_back(i);
    std::vector<std::size_t> candidates(prompt_len);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(candidates));
    ex.path_positions.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(spec.path_count));
    std::sort(ex.path_positions.begin(), ex.path_positions.end());

    fill_attention(ex, [&](std::size_t, std::size_t) { return spec.alpha_s_target; }, false);

    std::vector<std::size_t> group(spec.triple_count);
    std::iota(group.begin(), group.end(), std::size_t{0});
    const auto target = static_cast<std::size_t>(rng.below(spec.triple_count));
    fill_embeddings(ex, rng, group, target, spec.sas_target);

    for (std::size_t i = 0; i < spec.answer_count; ++i) {
        const double lp = rng.uniform(-2.5, -0.05);
        ex.token_logprob.push_back(static_cast<float>(lp));
        ex.token_maxprob.push_back(static_cast<float>(std::min(1.0, std::exp(lp) + rng.uniform(0.0, 0.1))));
    }
    ex.output_text = "ans: synthetic answer";
    ex.gold_answers = {"synthetic answer"};
    trace::validate(ex);
    return ex;
}

// ---------------------------------------------------------------------------
// Feature datasets
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "the", "film", "is", "probably", "a", "movie", "by", "i", "think", "it", "was", "maybe",
        "not", "sure", "about", "that", "answer", "could", "be", "directed", "released", "in"};
    return words;
}

const std::vector<std::string>& entity_words() {
    static const std::vector<std::string> words = {
        "Romance", "Drama", "Comedy", "Thriller", "Horror", "Western", "James_Cameron", "Sofia_Coppola",
        "Akira_Kurosawa", "Greta_Gerwig", "1994", "2001", "1977", "Documentary", "Animation", "Musical"};
    return words;
}

std::string pick(Rng& rng, const std::vector<std::string>& v) { return v[rng.below(v.size())]; }

// Terse "ans: X[, Y]" answers versus rambling ones.
std::string gen_output(Rng& rng, bool verbose) {
    std::string out;
    if (!verbose) {
        out = "ans: " + pick(rng, entity_words());
        const auto extra = rng.below(3);
        for (std::uint64_t i = 0; i < extra; ++i) out += ", " + pick(rng, entity_words());
        return out;
    }
    if (rng.bernoulli(0.5)) out = "ans: ";
    const auto len = 4 + rng.below(9);
    for (std::uint64_t i = 0; i < len; ++i) {
        if (i > 0) out += rng.bernoulli(0.15) ? ", " : " ";
        out += rng.bernoulli(0.2) ? pick(rng, entity_words()) : pick(rng, filler_words());
    }
    if (rng.bernoulli(0.4)) out += "?";
    return out;
}

std::string padded_id(const char* prefix, std::size_t i, std::size_t n) {
    std::string digits = std::to_string(i);
    const std::size_t width = std::max<std::size_t>(std::to_string(n > 0 ? n - 1 : 0).size(), 3);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

} // namespace

FeatureDataset gen_feature_dataset(std::size_t n, double separation, std::uint64_t seed, double positive_fraction) {
    if (n < 10) throw SpecError("feature dataset needs n >= 10");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) throw SpecError("positive_fraction must lie in (0, 1)");
    if (!(separation >= 0.0) || !std::isfinite(separation)) throw SpecError("separation must be finite and >= 0");

    Rng rng(seed);
    const auto n_pos = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * positive_fraction)), 1, n - 1);
    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
    rng.shuffle(std::span<int>(labels));

    FeatureDataset ds;
    ds.labels = labels;
    ds.features.columns = detector::full_feature_names();
    ds.features.values = Matrix(n, ds.features.columns.size());
    const double shift = separation * kFeatureSigma / 2.0;
    const double style_bias = std::min(0.4, 0.08 * separation);
    for (std::size_t r = 0; r < n; ++r) {
        const double sign = labels[r] == 1 ? 1.0 : -1.0;
        const double prd = std::clamp(0.72 + sign * shift + kFeatureSigma * rng.normal(), -1.0, 1.0);
        const double sas = std::clamp(0.37 - sign * shift + kFeatureSigma * rng.normal(), 0.0, 1.0);
        const bool verbose = rng.bernoulli(0.5 + sign * style_bias);
        auto text = gen_output(rng, verbose);
        const auto surface = detector::surface_features(text).values();

        ds.features.ids.push_back(padded_id("s", r, n));
        auto row = ds.features.values.row(r);
        row[0] = prd;
        row[1] = sas;
        std::copy(surface.begin(), surface.end(), row.begin() + 2);
        ds.outputs.push_back(std::move(text));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Planted quadrant fixture
// ---------------------------------------------------------------------------

QuadrantFixture planted_quadrant_fixture(std::uint64_t seed) {
    struct Plan {
        std::size_t count;
        std::size_t hallucinated;
        double prd_mean;
        double sas_mean;
        std::size_t prd_ties; // tie points at the PRD median, each mirrored
        std::size_t sas_ties; // tie points at the SAS median, each mirrored
    };
    // Low PRD holds 2600 points and low SAS 3000, so the 2500th and 2501st
    // order statistics both fall on the tie values once at least 101 / 501
    // points sit exactly there.
    constexpr Plan plans[4] = {
        {1400, 133, 0.752, 0.421, 0, 0},
        {600, 30, 0.701, 0.452, 0, 0},
        {2000, 444, 0.707, 0.340, 101, 501},
        {1000, 109, 0.754, 0.344, 0, 0},
    };
    constexpr double kMaxSpread = 0.019;

    Rng rng(seed);
    auto paired = [&](std::size_t count, double mean, double tie, std::size_t ties) {
        std::vector<double> v;
        for (std::size_t i = 0; i < ties; ++i) {
            v.push_back(tie);
            v.push_back(2.0 * mean - tie);
        }
        while (v.size() < count) {
            const double delta = rng.uniform(0.001, kMaxSpread);
            v.push_back(mean + delta);
            v.push_back(mean - delta);
        }
        rng.shuffle(std::span<double>(v));
        return v;
    };

    struct Point {
        double prd;
        double sas;
        int label;
    };
    std::vector<Point> points;
    for (const auto& p : plans) {
        const auto prd = paired(p.count, p.prd_mean, kPlantedMedianPrd, p.prd_ties);
        const auto sas = paired(p.count, p.sas_mean, kPlantedMedianSas, p.sas_ties);
        std::vector<int> labels(p.count, 0);
        std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(p.hallucinated), 1);
        rng.shuffle(std::span<int>(labels));
        for (std::size_t i = 0; i < p.count; ++i) points.push_back({prd[i], sas[i], labels[i]});
    }
    rng.shuffle(std::span<Point>(points));

    QuadrantFixture f;
    for (const auto& p : points) {
        f.prd.push_back(p.prd);
        f.sas.push_back(p.sas);
        f.labels.push_back(p.label);
    }
    return f;
}

// ---------------------------------------------------------------------------
// End-to-end fixture
// ---------------------------------------------------------------------------

namespace {

struct Relation {
    const char* name;
    const char* question;
    int kind; // 0 genre, 1 person, 2 year
};

constexpr Relation kRelations[] = {
    {"has_genre", "what genre is {} in", 0},
    {"directed_by", "who directed {}", 1},
    {"written_by", "who wrote {}", 1},
    {"starred_actors", "who acted in {}", 1},
    {"release_year", "when was {} released", 2},
};

const std::vector<std::string>& genres() {
    static const std::vector<std::string> g = {"Romance", "Drama",   "Comedy",      "Thriller", "Horror",
                                               "Western", "Musical", "Documentary", "Animation", "Crime"};
    return g;
}

std::string draw_value(Rng& rng, int kind) {
    switch (kind) {
    case 0:
        return pick(rng, genres());
    case 1:
        return "Person_" + std::to_string(rng.below(40));
    default:
        return std::to_string(1950 + rng.below(70));
    }
}

std::string film_name(std::uint64_t k) { return "Film_" + std::to_string(k); }

std::vector<float> unit_noise(Rng& rng, std::size_t d) {
    std::vector<float> v(d);
    double n = 0.0;
    std::vector<double> raw(d);
    for (auto& x : raw) {
        x = rng.normal();
        n += x * x;
    }
    n = std::sqrt(n);
    for (std::size_t i = 0; i < d; ++i) v[i] = static_cast<float>(raw[i] / n);
    return v;
}

std::vector<float> mix(const std::vector<float>& a, double wa, const std::vector<float>& b, double wb) {
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<float>(wa * a[i] + wb * b[i]);
    return out;
}

std::vector<float> token_rows(Rng& rng, const std::vector<float>& center, std::size_t rows, double noise) {
    std::vector<float> out;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto n = unit_noise(rng, center.size());
        const auto row = mix(center, 1.0, n, noise);
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

std::size_t word_count(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    std::string w;
    while (in >> w) ++n;
    return std::max<std::size_t>(n, 1);
}

struct Token {
    std::string text;
    std::size_t start;
    std::size_t end;
};

std::vector<Token> whitespace_tokens(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i == s.size()) break;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        out.push_back({s.substr(start, i - start), start, i});
    }
    return out;
}

} // namespace

void gen_dataset(const std::filesystem::path& dir, const DatasetOptions& o) {
    if (o.n < 6) throw SpecError("dataset needs at least 6 examples");
    if (o.dim < 3) throw SpecError("dataset needs d >= 3");
    std::filesystem::create_directories(dir / "traces");
    Rng rng(o.seed);

    std::vector<int> hallucinated(o.n, 0);
    std::fill(hallucinated.begin(), hallucinated.begin() + static_cast<std::ptrdiff_t>(o.n / 2), 1);
    rng.shuffle(std::span<int>(hallucinated));

    std::ofstream subgraphs(dir / "subgraphs.jsonl", std::ios::binary | std::ios::trunc);
    if (!subgraphs) throw Error("cannot write " + (dir / "subgraphs.jsonl").string());
    std::vector<trace::ManifestEntry> manifest;
    baselines::EmbeddingTable embeddings;
    CsvTable nli{{"id", "nli_contra"}, {}};

    for (std::size_t i = 0; i < o.n; ++i) {
        const bool halluc = hallucinated[i] == 1;
        graph::SubgraphRecord rec;
        rec.id = padded_id("q", i, o.n);
        const std::string film = film_name(100 + i);
        const auto& rel = kRelations[rng.below(std::size(kRelations))];
        rec.question = rel.question;
        rec.question.replace(rec.question.find("{}"), 2, film);

        auto& triples = rec.subgraph.triples;
        // Facts about the film itself; the asked relation has 1-2 answers.
        for (const auto& r : kRelations) {
            const auto values = 1 + rng.below(2);
            for (std::uint64_t v = 0; v < values; ++v) triples.push_back({film, r.name, draw_value(rng, r.kind)});
        }
        triples = graph::collapse_duplicates(triples);
        for (const auto& t : triples) {
            if (t.relation == rel.name) rec.gold_answers.push_back(t.tail);
        }
        // Other films sharing an answer, and unrelated facts.
        for (const auto& a : rec.gold_answers) {
            const auto others = 1 + rng.below(3);
            for (std::uint64_t k = 0; k < others; ++k) triples.push_back({film_name(rng.below(100)), rel.name, a});
        }
        const auto noise = 6 + rng.below(6);
        for (std::uint64_t k = 0; k < noise; ++k) {
            const auto& r = kRelations[rng.below(std::size(kRelations))];
            triples.push_back({film_name(rng.below(100)), r.name, draw_value(rng, r.kind)});
        }
        triples = graph::collapse_duplicates(triples);
        rec.subgraph.question_entities = {film};
        rec.subgraph.answer_entities = graph::EntitySet(rec.gold_answers.begin(), rec.gold_answers.end());
        subgraphs << graph::to_json(rec).dump() << '\n';

        // Prompt as the pruning + linearization stages will produce it.
        const auto pruned = graph::prune_subgraph(rec.subgraph, {.k = o.k});
        const auto prompt = linearize::linearize(pruned.triples, rec.question);

        std::string answer;
        if (halluc) {
            std::string wrong;
            do {
                wrong = draw_value(rng, rel.kind);
            } while (std::find(rec.gold_answers.begin(), rec.gold_answers.end(), wrong) != rec.gold_answers.end());
            answer = rng.bernoulli(0.3) ? "i think it is " + wrong : wrong;
        } else {
            answer = rec.gold_answers.front();
            if (rec.gold_answers.size() > 1 && rng.bernoulli(0.5)) answer += ", " + rec.gold_answers[1];
            if (rng.bernoulli(0.3)) answer = "it is " + answer;
        }
        const std::string output = "ans: " + answer;

        trace::TraceExample ex;
        ex.id = rec.id;
        ex.layers = o.layers;
        ex.heads = o.heads;
        ex.dim = o.dim;
        ex.output_text = output;
        ex.gold_answers = rec.gold_answers;
        const auto prompt_tokens = whitespace_tokens(prompt.text);
        for (std::size_t p = 0; p < prompt_tokens.size(); ++p) {
            ex.tokens.push_back(prompt_tokens[p].text);
            for (std::size_t t = 0; t < pruned.triples.size(); ++t) {
                const auto& span = prompt.triple_char_spans[t];
                if (pruned.is_path[t] && prompt_tokens[p].start >= span.start && prompt_tokens[p].end <= span.end) {
                    ex.path_positions.push_back(p);
                    break;
                }
            }
        }
        const auto generated = whitespace_tokens(output);
        for (std::size_t g = 0; g < generated.size(); ++g) {
            if (g > 0) ex.answer_positions.push_back(ex.tokens.size());
            ex.tokens.push_back(generated[g].text);
        }

        const double alpha = halluc ? rng.uniform(0.84, 0.94) : rng.uniform(0.76, 0.9);
        std::vector<double> head_alpha(o.layers * o.heads);
        for (auto& a : head_alpha) a = std::clamp(alpha + rng.uniform(-0.05, 0.05), 0.0, 1.0);
        fill_attention(ex, [&](std::size_t l, std::size_t h) { return head_alpha[l * o.heads + h]; }, true);

        std::map<graph::Triple, std::size_t> group_of;
        std::vector<std::size_t> group;
        for (const auto& t : pruned.triples) group.push_back(group_of.emplace(t, group_of.size()).first->second);
        const double sas = halluc ? rng.uniform(0.2, 0.5) : rng.uniform(0.45, 0.75);
        fill_embeddings(ex, rng, group, group.front(), sas);

        for (std::size_t g = 0; g < generated.size(); ++g) {
            const double lp = halluc ? rng.uniform(-2.5, -0.3) : rng.uniform(-0.8, -0.05);
            ex.token_logprob.push_back(static_cast<float>(lp));
            ex.token_maxprob.push_back(static_cast<float>(std::min(1.0, std::exp(lp) + rng.uniform(0.0, 0.1))));
        }
        trace::write_trace_file(dir / "traces" / (rec.id + ".ggat"), ex);
        manifest.push_back({rec.id, rec.id + ".ggat"});

        baselines::EmbeddingEntry e;
        e.id = rec.id;
        e.dim = o.dim;
        e.question = unit_noise(rng, o.dim);
        e.gold = unit_noise(rng, o.dim);
        const auto noise_vec = unit_noise(rng, o.dim);
        e.answer = halluc ? mix(noise_vec, 1.0, e.gold, 0.2) : mix(e.gold, 1.0, noise_vec, 0.3);
        e.question_tokens = token_rows(rng, e.question, word_count(rec.question), 0.5);
        e.gold_tokens = token_rows(rng, e.gold, word_count(rec.gold_answers.front()), 0.3);
        e.answer_tokens = token_rows(rng, e.answer, word_count(answer), 0.3);
        embeddings.emplace(rec.id, std::move(e));

        const double contra = halluc ? rng.uniform(0.45, 0.95) : rng.uniform(0.05, 0.4);
        nli.rows.push_back({rec.id, format_double(contra)});
    }
    trace::write_manifest(dir / "traces" / "manifest.jsonl", manifest);
    baselines::write_embeddings(dir / "embeddings.ggat", embeddings);
    if (o.with_nli) write_csv(dir / "nli.csv", nli);
}

} // namespace gga::synth
