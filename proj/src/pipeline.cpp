#include <gga/pipeline.hpp>

#include <gga/analysis.hpp>
#include <gga/error.hpp>
#include <gga/linearize.hpp>
#include <gga/metrics.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

namespace gga::pipeline {

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

std::optional<fs::path> optional_path(const nlohmann::json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return resolve(j.at(key).get<std::string>(), base);
}

nlohmann::json path_or_null(const std::optional<fs::path>& p) {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
}

} // namespace

PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base) {
    PipelineConfig c;
    try {
        c.subgraphs = resolve(j.at("subgraphs").get<std::string>(), base);
        c.traces = resolve(j.at("traces").get<std::string>(), base);
        c.embeddings = optional_path(j, "embeddings", base);
        c.nli = optional_path(j, "nli", base);
        c.prompt_template = optional_path(j, "template", base);
        c.patterns = optional_path(j, "patterns", base);
        c.out = resolve(j.value("out", std::string("out")), base);
        c.k = j.value("K", c.k);
        c.f1_threshold = j.value("f1_threshold", c.f1_threshold);
        c.kind = detector::model_kind_from_string(j.value("kind", std::string("gbdt")));
        c.subset = j.value("subset", c.subset);
        c.seed = j.value("seed", c.seed);
        c.reference = baselines::reference_source_from_string(j.value("reference_source", std::string("question")));
        c.folds = j.value("folds", c.folds);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed pipeline config: ") + e.what());
    }
    if (c.k == 0) throw InputError("K must be positive");
    if (!(c.f1_threshold >= 0.0 && c.f1_threshold <= 1.0)) throw InputError("f1_threshold must lie in [0, 1]");
    return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
    return {
        {"subgraphs", c.subgraphs.generic_string()},
        {"traces", c.traces.generic_string()},
        {"embeddings", path_or_null(c.embeddings)},
        {"nli", path_or_null(c.nli)},
        {"template", path_or_null(c.prompt_template)},
        {"patterns", path_or_null(c.patterns)},
        {"out", c.out.generic_string()},
        {"K", c.k},
        {"f1_threshold", c.f1_threshold},
        {"kind", detector::to_string(c.kind)},
        {"subset", c.subset},
        {"seed", c.seed},
        {"reference_source", baselines::to_string(c.reference)},
        {"folds", c.folds},
    };
}

PipelineConfig load_config(const fs::path& path) {
    return config_from_json(read_json(path), path.parent_path());
}

void apply_environment(PipelineConfig& c) {
    const char* env = std::getenv("GGA_SEED");
    if (env == nullptr || *env == '\0') return;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
        c.seed = v;
    } catch (const std::exception&) {
        throw InputError("GGA_SEED must be a non-negative integer, got '" + std::string(env) + "'");
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_jsonl(const fs::path& path, std::span<const nlohmann::json> lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& l : lines) out << l.dump() << '\n';
}

// ---------------------------------------------------------------------------
// prune
// ---------------------------------------------------------------------------

nlohmann::json prune_record(const graph::SubgraphRecord& record, std::size_t k, const std::string& prompt_template) {
    const auto pruned = graph::prune_subgraph(record.subgraph, {.k = k});
    const auto prompt = linearize::linearize(pruned.triples, record.question, prompt_template);
    nlohmann::json triples = nlohmann::json::array();
    nlohmann::json scores = nlohmann::json::array();
    nlohmann::json spans = nlohmann::json::array();
    for (std::size_t i = 0; i < pruned.triples.size(); ++i) {
        triples.push_back(graph::triple_to_json(pruned.triples[i]));
        scores.push_back(pruned.tes_scores[i] ? nlohmann::json(*pruned.tes_scores[i]) : nlohmann::json(nullptr));
        spans.push_back({prompt.triple_char_spans[i].start, prompt.triple_char_spans[i].end});
    }
    std::vector<bool> is_path(pruned.is_path.begin(), pruned.is_path.end());
    return {
        {"id", record.id},
        {"question", record.question},
        {"gold_answers", record.gold_answers},
        {"question_entities", record.subgraph.question_entities},
        {"answer_entities", record.subgraph.answer_entities},
        {"triples", triples},
        {"is_path", is_path},
        {"tes_scores", scores},
        {"distinct_count", pruned.distinct_count},
        {"over_budget", pruned.over_budget},
        {"prompt", prompt.text},
        {"triple_spans", spans},
        {"question_span", {prompt.question_char_span.start, prompt.question_char_span.end}},
    };
}

std::vector<nlohmann::json> prune_stage(std::span<const graph::SubgraphRecord> records, std::size_t k,
                                        const std::string& prompt_template) {
    std::vector<nlohmann::json> out;
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) throw StageError("prune", r.id, "duplicate id");
        try {
            out.push_back(prune_record(r, k, prompt_template));
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError("prune", r.id, std::string(e.kind()) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// traces, metrics, labels
// ---------------------------------------------------------------------------

std::vector<trace::TraceExample> load_traces(const fs::path& dir, const std::string& stage) {
    if (!fs::is_directory(dir)) throw StageError(stage, "", "trace directory not found: " + dir.string());
    trace::TraceDataset ds;
    try {
        ds = trace::open_dataset(dir);
    } catch (const Error& e) {
        throw StageError(stage, "", std::string(e.kind()) + ": " + e.what());
    }
    try {
        return trace::load_dataset(ds);
    } catch (const StageError& e) {
        throw StageError(stage, e.id(), e.what());
    }
}

namespace {

template <class F>
auto per_example(const char* stage, const trace::TraceExample& ex, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, ex.id, std::string(e.kind()) + ": " + e.what());
    }
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

} // namespace

CsvTable metrics_stage(std::span<const trace::TraceExample> traces) {
    CsvTable t{{"id", "prd", "sas"}, {}};
    for (const auto& ex : traces) {
        per_example("metrics", ex, [&] {
            const auto p = metrics::prd(ex);
            const auto s = metrics::sas(ex);
            t.rows.push_back({ex.id, fmt(p.prd), fmt(s.sas)});
            return 0;
        });
    }
    return t;
}

void write_per_head(const fs::path& path, std::span<const trace::TraceExample> traces) {
    nlohmann::json entries = nlohmann::json::array();
    std::vector<std::vector<float>> values;
    for (const auto& ex : traces) {
        const auto p = per_example("metrics", ex, [&] { return metrics::prd(ex); });
        entries.push_back({{"id", ex.id}, {"L", p.layers}, {"H", p.heads}});
        values.emplace_back(p.per_layer_head.begin(), p.per_layer_head.end());
    }
    std::vector<std::span<const float>> tensors(values.begin(), values.end());
    const nlohmann::json header = {
        {"kind", "per_head_prd"}, {"format_version", trace::kFormatVersion}, {"entries", entries}};
    trace::write_bytes(path, trace::encode_container(header, tensors));
}

CsvTable label_stage(std::span<const trace::TraceExample> traces, double f1_threshold,
                     const labeling::Normalizer& normalizer) {
    CsvTable t{{"id", "label", "em", "best_f1"}, {}};
    for (const auto& ex : traces) {
        per_example("label", ex, [&] {
            const auto r = labeling::label(ex.output_text, ex.gold_answers, f1_threshold, normalizer);
            t.rows.push_back({ex.id, r.label == labeling::Label::kHallucinated ? "1" : "0", r.em ? "1" : "0",
                              fmt(r.best_f1)});
            return 0;
        });
    }
    return t;
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

std::map<std::string, double> read_nli(const fs::path& path) {
    const auto csv = read_csv(path);
    const auto id = csv.index("id");
    const auto v = csv.index("nli_contra");
    std::map<std::string, double> out;
    for (const auto& row : csv.rows) {
        const double p = parse_double(row[v]);
        if (!(p >= 0.0 && p <= 1.0)) throw InputError("nli_contra for '" + row[id] + "' is outside [0, 1]");
        if (!out.emplace(row[id], p).second) throw InputError("duplicate id '" + row[id] + "' in " + path.string());
    }
    return out;
}

CsvTable baselines_stage(std::span<const trace::TraceExample> traces, const baselines::EmbeddingTable* embeddings,
                         const std::map<std::string, double>* nli, baselines::ReferenceSource reference) {
    CsvTable t;
    t.columns.push_back("id");
    const auto& names = detector::baseline_feature_names();
    t.columns.insert(t.columns.end(), names.begin(), names.end());
    for (const auto& ex : traces) {
        per_example("baselines", ex, [&] {
            baselines::BaselineRow row;
            row.perplexity_log = baselines::perplexity(ex.token_logprob);
            row.token_conf = baselines::token_confidence(ex.token_maxprob);
            row.max_token_prob = baselines::max_token_probability(ex.token_maxprob);
            if (embeddings != nullptr) {
                const auto it = embeddings->find(ex.id);
                if (it == embeddings->end()) throw InputError("no embeddings for this id");
                const auto& e = it->second;
                const bool gold = reference == baselines::ReferenceSource::kGold;
                const auto& ref_tokens = gold ? e.gold_tokens : e.question_tokens;
                const auto& ref_vec = gold ? e.gold : e.question;
                if (!e.answer_tokens.empty() && !ref_tokens.empty()) {
                    row.bertscore_f1 = baselines::bertscore_f1(e.answer_tokens, ref_tokens, e.dim);
                }
                if (!e.answer.empty() && !ref_vec.empty()) row.embed_div = baselines::embedding_divergence(ref_vec, e.answer);
            }
            if (nli != nullptr) {
                const auto it = nli->find(ex.id);
                if (it != nli->end()) row.nli_contra = baselines::enhance_contradiction(it->second);
            }
            t.rows.push_back({ex.id, fmt(row.perplexity_log), fmt(row.token_conf), fmt(row.max_token_prob),
                              fmt(row.bertscore_f1), fmt(row.embed_div), fmt(row.nli_contra)});
            return 0;
        });
    }
    return t;
}

// ---------------------------------------------------------------------------
// features, train, eval, analyze
// ---------------------------------------------------------------------------

namespace {

std::map<std::string, std::size_t> row_index(const CsvTable& t, const char* what) {
    const auto id = t.index("id");
    std::map<std::string, std::size_t> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (!out.emplace(t.rows[r][id], r).second) {
            throw InputError(std::string("duplicate id '") + t.rows[r][id] + "' in " + what);
        }
    }
    return out;
}

} // namespace

detector::FeatureTable features_stage(std::span<const trace::TraceExample> traces, const CsvTable& metrics,
                                      const CsvTable* baselines) {
    detector::FeatureTable t;
    t.columns = detector::full_feature_names();
    std::vector<std::size_t> baseline_cols;
    if (baselines != nullptr) {
        for (const auto& name : detector::baseline_feature_names()) {
            if (auto c = baselines->find(name)) {
                t.columns.push_back(name);
                baseline_cols.push_back(*c);
            }
        }
    }
    const auto metric_rows = row_index(metrics, "metrics");
    const auto baseline_rows = baselines != nullptr ? row_index(*baselines, "baselines") : std::map<std::string, std::size_t>{};
    const auto prd_col = metrics.index("prd");
    const auto sas_col = metrics.index("sas");

    std::vector<std::vector<double>> rows;
    for (const auto& ex : traces) {
        per_example("features", ex, [&] {
            const auto m = metric_rows.find(ex.id);
            if (m == metric_rows.end()) throw InputError("id missing from metrics");
            std::vector<double> row = {parse_double(metrics.rows[m->second][prd_col]),
                                       parse_double(metrics.rows[m->second][sas_col])};
            const auto surface = detector::surface_features(ex.output_text).values();
            row.insert(row.end(), surface.begin(), surface.end());
            if (baselines != nullptr) {
                const auto b = baseline_rows.find(ex.id);
                if (b == baseline_rows.end()) throw InputError("id missing from baselines");
                for (auto c : baseline_cols) {
                    const auto& cell = baselines->rows[b->second][c];
                    row.push_back(cell.empty() ? std::nan("") : parse_double(cell));
                }
            }
            rows.push_back(std::move(row));
            t.ids.push_back(ex.id);
            return 0;
        });
    }
    t.values = rows.empty() ? Matrix(0, t.columns.size()) : Matrix::from_rows(rows);
    return t;
}

std::vector<int> align_labels(const detector::FeatureTable& features, const CsvTable& labels) {
    const auto idx = row_index(labels, "labels");
    const auto col = labels.index("label");
    std::vector<int> y;
    for (const auto& id : features.ids) {
        const auto it = idx.find(id);
        if (it == idx.end()) throw InputError("no label for id '" + id + "'");
        y.push_back(labeling::label_from_string(labels.rows[it->second][col]) == labeling::Label::kHallucinated ? 1 : 0);
    }
    return y;
}

detector::DetectorModel train_stage(const detector::FeatureTable& features, std::span<const int> labels,
                                    detector::ModelKind kind, const std::string& subset, std::uint64_t seed) {
    const auto cols = detector::subset_columns(subset);
    const auto selected = features.select(cols);
    return detector::train(selected.values, labels, kind, {}, seed, selected.columns);
}

nlohmann::json eval_stage(const detector::DetectorModel& model, const detector::FeatureTable& features,
                          std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
    const auto selected = features.select(model.feature_names);
    const auto probs = detector::predict_proba(model, selected.values);
    detector::TrainParams params;
    params.gbdt = model.gbdt;
    params.logistic = model.logistic;
    const auto cv = detector::cross_validate(selected.values, labels, folds, model.kind, params, seed);
    return {
        {"kind", detector::to_string(model.kind)},
        {"features", model.feature_names},
        {"seed", seed},
        {"folds", folds},
        {"in_sample", detector::to_json(detector::evaluate(probs, labels, model.threshold))},
        {"cv", detector::to_json(cv)},
    };
}

AnalysisArtifacts analyze_stage(const detector::FeatureTable& features, std::span<const int> labels) {
    const auto cols = std::vector<std::string>{"prd", "sas"};
    const auto sel = features.select(cols);
    const auto prd = sel.values.column(0);
    const auto sas = sel.values.column(1);
    const auto report = analysis::analyze(prd, sas, labels);

    AnalysisArtifacts out;
    out.report = analysis::to_json(report);
    out.plot.columns = {"id", "prd", "sas", "label", "quadrant"};
    for (std::size_t i = 0; i < features.ids.size(); ++i) {
        const auto q = analysis::quadrant_of(prd[i], sas[i], report.quadrants.median_prd, report.quadrants.median_sas);
        out.plot.rows.push_back({features.ids[i], fmt(prd[i]), fmt(sas[i]), std::to_string(labels[i]),
                                 "Q" + std::to_string(static_cast<int>(q))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

namespace {

template <class F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, "", std::string(e.kind()) + ": " + e.what());
    } catch (const std::exception& e) {
        throw StageError(name, "", e.what());
    }
}

} // namespace

RunResult run_pipeline(const PipelineConfig& c) {
    RunResult result;
    fs::create_directories(c.out);
    auto emit = [&](const fs::path& p) { result.artifacts.push_back(p); };

    stage("prune", [&] {
        const auto records = graph::read_subgraphs(c.subgraphs);
        const std::string tmpl = c.prompt_template ? linearize::load_template(*c.prompt_template)
                                                   : std::string(linearize::default_template());
        const auto lines = prune_stage(records, c.k, tmpl);
        write_jsonl(c.out / "pruned.jsonl", lines);
        emit(c.out / "pruned.jsonl");
        return 0;
    });

    const auto traces = load_traces(c.traces, "metrics");
    const auto metrics = stage("metrics", [&] {
        auto t = metrics_stage(traces);
        write_csv(c.out / "metrics.csv", t);
        emit(c.out / "metrics.csv");
        return t;
    });

    const auto labels_csv = stage("label", [&] {
        const auto normalizer = c.patterns ? labeling::Normalizer::from_file(*c.patterns) : labeling::Normalizer();
        auto t = label_stage(traces, c.f1_threshold, normalizer);
        write_csv(c.out / "labels.csv", t);
        emit(c.out / "labels.csv");
        return t;
    });

    std::optional<CsvTable> baselines_csv;
    if (c.embeddings) {
        baselines_csv = stage("baselines", [&] {
            const auto emb = baselines::read_embeddings(*c.embeddings);
            std::optional<std::map<std::string, double>> nli;
            if (c.nli) nli = read_nli(*c.nli);
            auto t = baselines_stage(traces, &emb, nli ? &*nli : nullptr, c.reference);
            write_csv(c.out / "baselines.csv", t);
            emit(c.out / "baselines.csv");
            return t;
        });
    }

    const auto features = stage("features", [&] {
        auto t = features_stage(traces, metrics, baselines_csv ? &*baselines_csv : nullptr);
        write_csv(c.out / "features.csv", detector::to_csv(t));
        emit(c.out / "features.csv");
        return t;
    });

    const auto y = stage("train", [&] { return align_labels(features, labels_csv); });
    const auto model = stage("train", [&] {
        auto m = train_stage(features, y, c.kind, c.subset, c.seed);
        std::ofstream(c.out / "model.json", std::ios::binary | std::ios::trunc) << detector::serialize(m);
        emit(c.out / "model.json");
        return m;
    });

    stage("eval", [&] {
        write_json(c.out / "metrics.json", eval_stage(model, features, y, c.folds, c.seed));
        emit(c.out / "metrics.json");
        return 0;
    });

    stage("analyze", [&] {
        const auto a = analyze_stage(features, y);
        write_json(c.out / "report.json", a.report);
        write_csv(c.out / "plot.csv", a.plot);
        emit(c.out / "report.json");
        emit(c.out / "plot.csv");
        return 0;
    });
    return result;
}

} // namespace gga::pipeline
