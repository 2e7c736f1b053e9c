#include <gga/baselines.hpp>
#include <gga/error.hpp>
#include <gga/graph.hpp>
#include <gga/labeling.hpp>
#include <gga/linearize.hpp>
#include <gga/metrics.hpp>
#include <gga/pipeline.hpp>
#include <gga/synth.hpp>
#include <gga/trace.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace gga;

namespace {

// nlohmann -> Python through the json module; the payloads here are small.
py::object to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::handle& obj) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict prd_dict(const metrics::PrdResult& r) {
    py::dict d;
    d["prd"] = r.prd;
    d["layers"] = r.layers;
    d["heads"] = r.heads;
    d["per_layer_head"] = r.per_layer_head;
    return d;
}

py::dict sas_dict(const metrics::SasResult& r) {
    py::dict d;
    d["sas"] = r.sas;
    d["per_token"] = r.per_token;
    d["argmax_triple"] = r.argmax_triple;
    d["layer_mismatch"] = r.layer_mismatch;
    return d;
}

py::dict trace_dict(const trace::TraceExample& ex) {
    py::dict d;
    d["id"] = ex.id;
    d["tokens"] = ex.tokens;
    d["answer_positions"] = ex.answer_positions;
    d["path_positions"] = ex.path_positions;
    d["shape"] = py::dict(py::arg("L") = ex.layers, py::arg("H") = ex.heads, py::arg("A") = ex.answer_count(),
                          py::arg("T") = ex.token_count(), py::arg("d") = ex.dim, py::arg("N") = ex.triple_count,
                          py::arg("G") = ex.generated_count());
    d["attention_normalized"] = ex.attention_normalized;
    d["output_text"] = ex.output_text;
    d["gold_answers"] = ex.gold_answers;
    d["attention"] = ex.attention;
    return d;
}

} // namespace

PYBIND11_MODULE(_gga, m) {
    m.doc() = "Graph-grounded hallucination analysis";

    static py::exception<Error> base_error(m, "GgaError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(base_error.ptr(), (std::string(e.kind()) + ": " + e.what()).c_str());
        }
    });

    m.def("read_trace", [](const std::filesystem::path& path) { return trace_dict(trace::read_trace_file(path)); },
          py::arg("path"), "Parse and validate one GGAT1 trace file.");
    m.def("prd", [](const std::filesystem::path& path) { return prd_dict(metrics::prd(trace::read_trace_file(path))); },
          py::arg("path"), "Path reliance degree of a trace file.");
    m.def("sas", [](const std::filesystem::path& path) { return sas_dict(metrics::sas(trace::read_trace_file(path))); },
          py::arg("path"), "Semantic alignment score of a trace file.");
    m.def(
        "validate_traces",
        [](const std::filesystem::path& dir) { return to_py(trace::to_json(trace::validate_dataset(trace::open_dataset(dir)))); },
        py::arg("dir"), "Validation report for a trace directory.");

    m.def(
        "prune",
        [](const py::object& record, std::size_t k) {
            const auto r = graph::subgraph_record_from_json(from_py(record));
            return to_py(pipeline::prune_record(r, k, std::string(linearize::default_template())));
        },
        py::arg("record"), py::arg("k") = 20, "One pruned.jsonl record from a subgraph record dict.");

    m.def("normalize", [](const std::string& s) { return labeling::normalize(s); }, py::arg("text"));
    m.def("token_f1", [](const std::string& p, const std::string& g) { return labeling::token_f1(p, g); },
          py::arg("prediction"), py::arg("gold"));
    m.def(
        "label",
        [](const std::string& output, const std::vector<std::string>& golds, double threshold) {
            const auto r = labeling::label(output, golds, threshold);
            py::dict d;
            d["label"] = std::string(labeling::to_string(r.label));
            d["em"] = r.em;
            d["best_f1"] = r.best_f1;
            d["extracted"] = r.extracted;
            return d;
        },
        py::arg("output"), py::arg("gold_answers"), py::arg("threshold") = labeling::kDefaultF1Threshold);

    m.def("perplexity", [](const std::vector<float>& lp) { return baselines::perplexity(lp); }, py::arg("token_logprobs"),
          "Log of the clipped perplexity.");
    m.def(
        "embedding_divergence",
        [](const std::vector<float>& q, const std::vector<float>& a) { return baselines::embedding_divergence(q, a); },
        py::arg("question"), py::arg("answer"));

    m.def(
        "gen_dataset",
        [](const std::filesystem::path& dir, std::size_t n, std::uint64_t seed) {
            synth::DatasetOptions o;
            o.n = n;
            o.seed = seed;
            synth::gen_dataset(dir, o);
        },
        py::arg("dir"), py::arg("n") = 20, py::arg("seed") = 42, "Write a synthetic end-to-end dataset.");

    m.def(
        "run_pipeline",
        [](const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& out) {
            auto c = pipeline::load_config(config_path);
            pipeline::apply_environment(c);
            if (out) c.out = *out;
            std::vector<std::string> paths;
            for (const auto& p : pipeline::run_pipeline(c).artifacts) paths.push_back(p.string());
            return paths;
        },
        py::arg("config"), py::arg("out") = py::none(), "Run every stage; returns the artifact paths.");
}
