// gga: command-line entry point for the GraphRAG hallucination-analysis toolkit.

#include <gga/analysis.hpp>
#include <gga/baselines.hpp>
#include <gga/detector.hpp>
#include <gga/error.hpp>
#include <gga/graph.hpp>
#include <gga/labeling.hpp>
#include <gga/linearize.hpp>
#include <gga/pipeline.hpp>
#include <gga/synth.hpp>
#include <gga/trace.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace gga;

namespace {

std::string read_template(const std::string& path) {
    return path.empty() ? std::string(linearize::default_template()) : linearize::load_template(path);
}

std::uint64_t effective_seed(const std::optional<std::uint64_t>& flag) {
    pipeline::PipelineConfig c;
    pipeline::apply_environment(c);
    return flag.value_or(c.seed);
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

detector::FeatureTable read_features(const std::string& path) {
    return detector::feature_table_from_csv(read_csv(path));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GraphRAG hallucination analysis toolkit"};
    app.require_subcommand(1);

    // prune
    std::string subgraphs_path, out_path, template_path;
    std::size_t k = 20;
    auto* prune = app.add_subcommand("prune", "Prune subgraphs to K triples and render prompts (pruned.jsonl)");
    prune->add_option("--subgraphs", subgraphs_path, "Subgraph JSON-lines input")->required()->check(CLI::ExistingFile);
    prune->add_option("--out", out_path, "Output pruned.jsonl")->required();
    prune->add_option("-k,--k", k, "Triples per pruned subgraph")->capture_default_str()->check(CLI::PositiveNumber);
    prune->add_option("--template", template_path, "Prompt template with {TRIPLES} and {QUESTION}")
        ->check(CLI::ExistingFile);

    // linearize
    std::string pruned_path;
    auto* lin = app.add_subcommand("linearize", "Render prompts for already pruned subgraphs");
    lin->add_option("--pruned", pruned_path, "pruned.jsonl input")->required()->check(CLI::ExistingFile);
    lin->add_option("--out", out_path, "Output prompts JSON-lines")->required();
    lin->add_option("--template", template_path, "Prompt template")->check(CLI::ExistingFile);

    // validate
    std::string traces_dir;
    auto* validate = app.add_subcommand("validate", "Check every trace of a dataset; exit 1 on any failure");
    validate->add_option("--traces", traces_dir, "Trace directory")->required();
    validate->add_option("--out", out_path, "Write the JSON report here instead of stdout");

    // metrics
    std::string per_head_path;
    auto* metrics_cmd = app.add_subcommand("metrics", "PRD and SAS per trace (id,prd,sas)");
    metrics_cmd->add_option("--traces", traces_dir, "Trace directory")->required();
    metrics_cmd->add_option("--out", out_path, "Output metrics.csv")->required();
    metrics_cmd->add_option("--per-head", per_head_path, "Also dump per-layer-head PRD to this file");

    // label
    std::string patterns_path;
    double f1_threshold = labeling::kDefaultF1Threshold;
    auto* label_cmd = app.add_subcommand("label", "Hallucination labels (id,label,em,best_f1)");
    label_cmd->add_option("--traces", traces_dir, "Trace directory")->required();
    label_cmd->add_option("--out", out_path, "Output labels.csv")->required();
    label_cmd->add_option("--patterns", patterns_path, "Prefix regexes, one per line")->check(CLI::ExistingFile);
    label_cmd->add_option("--f1-threshold", f1_threshold, "Token F1 needed for a truthful label")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));

    // baselines
    std::string embeddings_path, nli_path, reference = "question";
    auto* base_cmd = app.add_subcommand("baselines", "Baseline signals per trace");
    base_cmd->add_option("--traces", traces_dir, "Trace directory")->required();
    base_cmd->add_option("--embeddings", embeddings_path, "Embeddings container")->check(CLI::ExistingFile);
    base_cmd->add_option("--nli", nli_path, "CSV of id,nli_contra probabilities")->check(CLI::ExistingFile);
    base_cmd->add_option("--reference", reference, "Compare answers against the question or the gold answers")
        ->capture_default_str()
        ->check(CLI::IsMember({"question", "gold"}));
    base_cmd->add_option("--out", out_path, "Output baselines.csv")->required();

    // features
    std::string metrics_path, baselines_path;
    auto* feat_cmd = app.add_subcommand("features", "Assemble the detector feature table");
    feat_cmd->add_option("--traces", traces_dir, "Trace directory")->required();
    feat_cmd->add_option("--metrics", metrics_path, "metrics.csv")->required()->check(CLI::ExistingFile);
    feat_cmd->add_option("--baselines", baselines_path, "baselines.csv")->check(CLI::ExistingFile);
    feat_cmd->add_option("--out", out_path, "Output features.csv")->required();

    // train
    std::string features_path, labels_path, kind = "gbdt", subset = "gga-full";
    std::optional<std::uint64_t> seed;
    auto* train_cmd = app.add_subcommand("train", "Fit the detector");
    train_cmd->add_option("--features", features_path, "features.csv")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--labels", labels_path, "labels.csv")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--kind", kind, "gbdt or logistic")->capture_default_str()->check(CLI::IsMember({"gbdt", "logistic"}));
    train_cmd->add_option("--subset", subset, "sas-only, prd-only, gga-core, gga-full or a column list")
        ->capture_default_str();
    train_cmd->add_option("--seed", seed, "Random seed (default 42, or GGA_SEED)");
    train_cmd->add_option("--out", out_path, "Output model.json")->required();

    // eval
    std::string model_path;
    std::size_t folds = 3;
    auto* eval_cmd = app.add_subcommand("eval", "In-sample and cross-validated detector metrics");
    eval_cmd->add_option("--model", model_path, "model.json")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--features", features_path, "features.csv")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--labels", labels_path, "labels.csv")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();
    eval_cmd->add_option("--seed", seed, "Fold seed (default 42, or GGA_SEED)");
    eval_cmd->add_option("--out", out_path, "Output metrics.json")->required();

    // analyze
    std::string plot_path;
    auto* analyze_cmd = app.add_subcommand("analyze", "Group statistics and the PRD x SAS quadrant table");
    analyze_cmd->add_option("--features", features_path, "features.csv")->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--labels", labels_path, "labels.csv")->required()->check(CLI::ExistingFile);
    analyze_cmd->add_option("--out", out_path, "Output report.json")->required();
    analyze_cmd->add_option("--plot", plot_path, "Plot CSV (default: plot.csv next to the report)");

    // synth
    auto* synth = app.add_subcommand("synth", "Synthetic traces and datasets");
    synth->require_subcommand(1);
    std::string spec_path;
    auto* synth_trace = synth->add_subcommand("trace", "One trace from a JSON spec");
    synth_trace->add_option("--spec", spec_path, "Spec JSON")->required()->check(CLI::ExistingFile);
    synth_trace->add_option("--out", out_path, "Output directory")->required();

    std::size_t n = 5000;
    double separation = 1.5;
    double positive_fraction = 0.5;
    auto* synth_features = synth->add_subcommand("features", "Labelled feature table with tunable separation");
    synth_features->add_option("--n", n, "Rows")->capture_default_str();
    synth_features->add_option("--sep", separation, "Cluster separation in sigmas")->capture_default_str();
    synth_features->add_option("--positive-fraction", positive_fraction, "Share of hallucinated rows")
        ->capture_default_str();
    synth_features->add_option("--seed", seed, "Random seed");
    synth_features->add_option("--out", out_path, "Output features.csv")->required();
    synth_features->add_option("--labels", labels_path, "Output labels.csv (default: next to features)");

    synth::DatasetOptions dataset_opts;
    auto* synth_dataset = synth->add_subcommand("dataset", "End-to-end fixture: subgraphs, traces, embeddings");
    synth_dataset->add_option("--n", dataset_opts.n, "Examples")->capture_default_str();
    synth_dataset->add_option("--seed", seed, "Random seed");
    synth_dataset->add_option("--out", out_path, "Output directory")->required();

    // run
    std::string config_path;
    std::optional<std::string> run_out, run_kind, run_subset;
    std::optional<std::size_t> run_k;
    auto* run = app.add_subcommand("run", "Full pipeline from a JSON config");
    run->add_option("--config", config_path, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Override the output directory");
    run->add_option("--kind", run_kind, "Override the classifier kind")->check(CLI::IsMember({"gbdt", "logistic"}));
    run->add_option("--subset", run_subset, "Override the feature subset");
    run->add_option("--k", run_k, "Override K");
    run->add_option("--seed", seed, "Override the seed (beats GGA_SEED)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prune) {
            const auto records = graph::read_subgraphs(subgraphs_path);
            ensure_parent(out_path);
            pipeline::write_jsonl(out_path, pipeline::prune_stage(records, k, read_template(template_path)));
        } else if (*lin) {
            const auto tmpl = read_template(template_path);
            std::ifstream in(pruned_path);
            std::vector<nlohmann::json> lines;
            std::string line;
            while (std::getline(in, line)) {
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                const auto j = nlohmann::json::parse(line);
                std::vector<graph::Triple> triples;
                for (const auto& t : j.at("triples")) triples.push_back(graph::triple_from_json(t));
                const auto p = linearize::linearize(triples, j.value("question", std::string{}), tmpl);
                nlohmann::json spans = nlohmann::json::array();
                for (const auto& s : p.triple_char_spans) spans.push_back({s.start, s.end});
                lines.push_back({{"id", j.at("id")},
                                 {"prompt", p.text},
                                 {"triple_spans", spans},
                                 {"question_span", {p.question_char_span.start, p.question_char_span.end}}});
            }
            ensure_parent(out_path);
            pipeline::write_jsonl(out_path, lines);
        } else if (*validate) {
            const auto report = trace::validate_dataset(trace::open_dataset(traces_dir));
            const auto j = trace::to_json(report);
            if (out_path.empty()) {
                std::cout << j.dump(2) << '\n';
            } else {
                ensure_parent(out_path);
                pipeline::write_json(out_path, j);
            }
            std::cerr << report.passed << " passed, " << report.failed << " failed\n";
            return report.ok() ? 0 : 1;
        } else if (*metrics_cmd) {
            const auto traces = pipeline::load_traces(traces_dir, "metrics");
            ensure_parent(out_path);
            write_csv(out_path, pipeline::metrics_stage(traces));
            if (!per_head_path.empty()) pipeline::write_per_head(per_head_path, traces);
        } else if (*label_cmd) {
            const auto traces = pipeline::load_traces(traces_dir, "label");
            const auto normalizer =
                patterns_path.empty() ? labeling::Normalizer() : labeling::Normalizer::from_file(patterns_path);
            ensure_parent(out_path);
            write_csv(out_path, pipeline::label_stage(traces, f1_threshold, normalizer));
        } else if (*base_cmd) {
            const auto traces = pipeline::load_traces(traces_dir, "baselines");
            std::optional<baselines::EmbeddingTable> emb;
            if (!embeddings_path.empty()) emb = baselines::read_embeddings(embeddings_path);
            std::optional<std::map<std::string, double>> nli;
            if (!nli_path.empty()) nli = pipeline::read_nli(nli_path);
            ensure_parent(out_path);
            write_csv(out_path, pipeline::baselines_stage(traces, emb ? &*emb : nullptr, nli ? &*nli : nullptr,
                                                          baselines::reference_source_from_string(reference)));
        } else if (*feat_cmd) {
            const auto traces = pipeline::load_traces(traces_dir, "features");
            const auto metrics = read_csv(metrics_path);
            std::optional<CsvTable> base;
            if (!baselines_path.empty()) base = read_csv(baselines_path);
            ensure_parent(out_path);
            write_csv(out_path, detector::to_csv(pipeline::features_stage(traces, metrics, base ? &*base : nullptr)));
        } else if (*train_cmd) {
            const auto features = read_features(features_path);
            const auto y = pipeline::align_labels(features, read_csv(labels_path));
            const auto model = pipeline::train_stage(features, y, detector::model_kind_from_string(kind), subset,
                                                     effective_seed(seed));
            ensure_parent(out_path);
            std::ofstream(out_path, std::ios::binary | std::ios::trunc) << detector::serialize(model);
        } else if (*eval_cmd) {
            const auto model = detector::model_from_json(pipeline::read_json(model_path));
            const auto features = read_features(features_path);
            const auto y = pipeline::align_labels(features, read_csv(labels_path));
            ensure_parent(out_path);
            pipeline::write_json(out_path, pipeline::eval_stage(model, features, y, folds, effective_seed(seed)));
        } else if (*analyze_cmd) {
            const auto features = read_features(features_path);
            const auto y = pipeline::align_labels(features, read_csv(labels_path));
            const auto a = pipeline::analyze_stage(features, y);
            ensure_parent(out_path);
            pipeline::write_json(out_path, a.report);
            write_csv(plot_path.empty() ? fs::path(out_path).parent_path() / "plot.csv" : fs::path(plot_path), a.plot);
        } else if (*synth_trace) {
            const auto spec = synth::spec_from_json(pipeline::read_json(spec_path));
            const auto ex = synth::gen_trace(spec);
            fs::create_directories(out_path);
            trace::write_trace_file(fs::path(out_path) / (ex.id + ".ggat"), ex);
            const trace::ManifestEntry entry{ex.id, ex.id + ".ggat"};
            trace::write_manifest(fs::path(out_path) / "manifest.jsonl", std::span(&entry, 1));
        } else if (*synth_features) {
            const auto ds = synth::gen_feature_dataset(n, separation, effective_seed(seed), positive_fraction);
            ensure_parent(out_path);
            write_csv(out_path, detector::to_csv(ds.features));
            CsvTable labels{{"id", "label"}, {}};
            for (std::size_t i = 0; i < ds.labels.size(); ++i) {
                labels.rows.push_back({ds.features.ids[i], std::to_string(ds.labels[i])});
            }
            write_csv(labels_path.empty() ? fs::path(out_path).parent_path() / "labels.csv" : fs::path(labels_path),
                      labels);
        } else if (*synth_dataset) {
            dataset_opts.seed = effective_seed(seed);
            synth::gen_dataset(out_path, dataset_opts);
        } else if (*run) {
            auto config = pipeline::load_config(config_path);
            pipeline::apply_environment(config);
            if (seed) config.seed = *seed;
            if (run_out) config.out = *run_out;
            if (run_kind) config.kind = detector::model_kind_from_string(*run_kind);
            if (run_subset) config.subset = *run_subset;
            if (run_k) config.k = *run_k;
            const auto result = pipeline::run_pipeline(config);
            for (const auto& p : result.artifacts) std::cout << p.generic_string() << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "error: stage " << e.stage() << (e.id().empty() ? "" : " (id " + e.id() + ")") << ": " << e.what()
                  << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
