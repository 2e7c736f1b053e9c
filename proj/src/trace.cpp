#include <gga/trace.hpp>

#include <gga/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace gga::trace {

namespace {

constexpr std::size_t kPrefixSize = kMagic.size() + 8;

const std::set<std::string> kKnownHeaderKeys = {
    "id", "tokens", "answer_positions", "path_positions", "shapes",
    "flags", "layers", "output_text", "gold_answers",
};

std::size_t checked_product(std::initializer_list<std::size_t> dims) {
    std::size_t out = 1;
    for (auto d : dims) {
        if (d != 0 && out > std::numeric_limits<std::size_t>::max() / d) {
            throw ShapeError("tensor shape overflows");
        }
        out *= d;
    }
    return out;
}

void append_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_f32(Bytes& out, std::span<const float> values) {
    for (float f : values) {
        const auto bits = std::bit_cast<std::uint32_t>(f);
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
}

template <class T>
T header_get(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("header missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(std::string("header field '") + key + "' has the wrong type");
    }
}

void check_positions(const std::vector<std::size_t>& positions, std::size_t token_count, const char* name) {
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= token_count) {
            throw InvariantError(std::string(name) + " index " + std::to_string(positions[i]) +
                                 " out of range for T=" + std::to_string(token_count));
        }
        if (i > 0 && positions[i] <= positions[i - 1]) {
            throw InvariantError(std::string(name) + " must be strictly increasing");
        }
    }
}

} // namespace

std::span<const float> TraceExample::attention_row(std::size_t layer, std::size_t head, std::size_t answer) const {
    const std::size_t t = token_count();
    const std::size_t offset = ((layer * heads + head) * answer_count() + answer) * t;
    return std::span<const float>(attention).subspan(offset, t);
}

std::span<const float> TraceExample::hidden_row(std::size_t answer) const {
    return std::span<const float>(answer_hidden).subspan(answer * dim, dim);
}

std::span<const float> TraceExample::triple_row(std::size_t triple) const {
    return std::span<const float>(triple_embeddings).subspan(triple * dim, dim);
}

void check_shapes(const TraceExample& ex) {
    const std::size_t t = ex.token_count();
    const std::size_t a = ex.answer_count();
    if (ex.attention.size() != checked_product({ex.layers, ex.heads, a, t})) {
        throw ShapeError("attention has " + std::to_string(ex.attention.size()) + " values, expected L*H*A*T = " +
                         std::to_string(checked_product({ex.layers, ex.heads, a, t})));
    }
    if (ex.answer_hidden.size() != checked_product({a, ex.dim})) {
        throw ShapeError("answer_hidden size does not match [A][d]");
    }
    if (ex.triple_embeddings.size() != checked_product({ex.triple_count, ex.dim})) {
        throw ShapeError("triple_embeddings size does not match [N][d]");
    }
    if (ex.token_logprob.size() != ex.token_maxprob.size()) {
        throw ShapeError("token_logprob and token_maxprob lengths differ");
    }
}

void validate(const TraceExample& ex) {
    check_shapes(ex);
    const std::size_t t = ex.token_count();
    if (ex.id.empty()) throw InvariantError("id must be non-empty");
    if (t == 0) throw InvariantError("token sequence is empty");
    if (ex.layers == 0 || ex.heads == 0) throw InvariantError("L and H must be positive");
    if (ex.dim == 0) throw InvariantError("hidden dimension d must be positive");
    if (ex.triple_count == 0) throw InvariantError("triple count N must be >= 1");
    check_positions(ex.answer_positions, t, "answer_positions");
    check_positions(ex.path_positions, t, "path_positions");

    std::vector<std::size_t> overlap;
    std::set_intersection(ex.answer_positions.begin(), ex.answer_positions.end(), ex.path_positions.begin(),
                          ex.path_positions.end(), std::back_inserter(overlap));
    if (!overlap.empty()) {
        throw InvariantError("answer and path positions overlap at index " + std::to_string(overlap.front()));
    }

    for (std::size_t l = 0; l < ex.layers; ++l) {
        for (std::size_t h = 0; h < ex.heads; ++h) {
            for (std::size_t i = 0; i < ex.answer_count(); ++i) {
                const auto row = ex.attention_row(l, h, i);
                const std::string where =
                    "attention row (l=" + std::to_string(l) + ", h=" + std::to_string(h) + ", i=" + std::to_string(i) + ")";
                if (ex.attention_normalized) {
                    double sum = 0.0;
                    for (float v : row) {
                        if (!std::isfinite(v) || v < 0.0F) throw InvariantError(where + " has a negative or non-finite weight");
                        sum += v;
                    }
                    if (std::abs(sum - 1.0) > kRowSumTolerance) {
                        throw InvariantError(where + " sums to " + std::to_string(sum) + ", expected 1");
                    }
                } else {
                    bool any_visible = false;
                    for (float v : row) {
                        if (std::isnan(v) || v == std::numeric_limits<float>::infinity()) {
                            throw InvariantError(where + " has a NaN or +inf score");
                        }
                        if (v > kMaskedScore) any_visible = true;
                    }
                    if (!any_visible) throw InvariantError(where + " is fully masked");
                }
            }
        }
    }

    for (const auto* tensor : {&ex.answer_hidden, &ex.triple_embeddings, &ex.token_logprob}) {
        if (!std::all_of(tensor->begin(), tensor->end(), [](float v) { return std::isfinite(v); })) {
            throw InvariantError("non-finite value in hidden states, triple embeddings or token log-probabilities");
        }
    }
    for (float p : ex.token_maxprob) {
        if (!(p >= 0.0F && p <= 1.0F)) throw InvariantError("token_maxprob values must lie in [0, 1]");
    }
}

Container decode_container(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size() ||
        !std::equal(kMagic.begin(), kMagic.end(), bytes.begin(),
                    [](char c, std::uint8_t b) { return static_cast<std::uint8_t>(c) == b; })) {
        throw FormatError("bad magic, expected \"GGAT1\"");
    }
    if (bytes.size() < kPrefixSize) throw FormatError("truncated before header length");
    std::uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i) header_len |= std::uint64_t{bytes[kMagic.size() + i]} << (8 * i);
    if (header_len > bytes.size() - kPrefixSize) throw FormatError("truncated inside JSON header");

    Container c;
    const auto header_bytes = bytes.subspan(kPrefixSize, header_len);
    try {
        c.header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("header is not valid JSON: ") + e.what());
    }
    if (!c.header.is_object()) throw FormatError("header must be a JSON object");
    c.payload = bytes.subspan(kPrefixSize + header_len);
    return c;
}

Bytes encode_container(const nlohmann::json& header, std::span<const std::span<const float>> tensors) {
    std::string text;
    try {
        text = header.dump();
    } catch (const nlohmann::json::type_error& e) {
        throw InvariantError(std::string("header is not encodable as UTF-8 JSON: ") + e.what());
    }
    Bytes out(kMagic.begin(), kMagic.end());
    append_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (auto t : tensors) append_f32(out, t);
    return out;
}

std::vector<float> read_f32(std::span<const std::uint8_t> payload, std::size_t& offset, std::size_t count,
                            std::string_view what) {
    if (count > (payload.size() - offset) / 4) {
        throw FormatError("truncated inside tensor '" + std::string(what) + "'");
    }
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t{payload[offset + 4 * i + b]} << (8 * b);
        out[i] = std::bit_cast<float>(bits);
    }
    offset += 4 * count;
    return out;
}

TraceExample parse_trace(std::span<const std::uint8_t> bytes) {
    const auto c = decode_container(bytes);
    const auto& h = c.header;

    TraceExample ex;
    ex.id = header_get<std::string>(h, "id");
    ex.tokens = header_get<std::vector<std::string>>(h, "tokens");
    ex.answer_positions = header_get<std::vector<std::size_t>>(h, "answer_positions");
    ex.path_positions = header_get<std::vector<std::size_t>>(h, "path_positions");
    ex.output_text = header_get<std::string>(h, "output_text");
    ex.gold_answers = header_get<std::vector<std::string>>(h, "gold_answers");

    const auto shapes = header_get<nlohmann::json>(h, "shapes");
    const auto flags = header_get<nlohmann::json>(h, "flags");
    if (!shapes.is_object() || !flags.is_object()) throw FormatError("shapes and flags must be objects");
    ex.layers = header_get<std::size_t>(shapes, "L");
    ex.heads = header_get<std::size_t>(shapes, "H");
    const auto a = header_get<std::size_t>(shapes, "A");
    const auto t = header_get<std::size_t>(shapes, "T");
    ex.dim = header_get<std::size_t>(shapes, "d");
    ex.triple_count = header_get<std::size_t>(shapes, "N");
    const auto g = header_get<std::size_t>(shapes, "G");
    ex.attention_normalized = header_get<bool>(flags, "attention_normalized");
    for (const auto& [key, value] : flags.items()) {
        if (key != "attention_normalized") ex.extra_flags[key] = value;
    }
    if (auto it = h.find("layers"); it != h.end()) {
        ex.hidden_layer = header_get<int>(*it, "answer_hidden");
        ex.triple_layer = header_get<int>(*it, "triple_embeddings");
    }
    for (const auto& [key, value] : h.items()) {
        if (!kKnownHeaderKeys.contains(key)) ex.extra_header[key] = value;
    }

    if (ex.tokens.size() != t) throw ShapeError("header lists " + std::to_string(ex.tokens.size()) + " tokens but T=" + std::to_string(t));
    if (ex.answer_positions.size() != a) throw ShapeError("header lists " + std::to_string(ex.answer_positions.size()) + " answer positions but A=" + std::to_string(a));

    std::size_t offset = 0;
    ex.attention = read_f32(c.payload, offset, checked_product({ex.layers, ex.heads, a, t}), "attention");
    ex.answer_hidden = read_f32(c.payload, offset, checked_product({a, ex.dim}), "answer_hidden");
    ex.triple_embeddings = read_f32(c.payload, offset, checked_product({ex.triple_count, ex.dim}), "triple_embeddings");
    ex.token_logprob = read_f32(c.payload, offset, g, "token_logprob");
    ex.token_maxprob = read_f32(c.payload, offset, g, "token_maxprob");
    if (offset != c.payload.size()) {
        throw ShapeError(std::to_string(c.payload.size() - offset) + " trailing payload bytes beyond declared shapes");
    }
    validate(ex);
    return ex;
}

Bytes write_trace(const TraceExample& ex) {
    validate(ex);
    nlohmann::json h = ex.extra_header.is_object() ? ex.extra_header : nlohmann::json::object();
    nlohmann::json flags = ex.extra_flags.is_object() ? ex.extra_flags : nlohmann::json::object();
    flags["attention_normalized"] = ex.attention_normalized;
    h["id"] = ex.id;
    h["tokens"] = ex.tokens;
    h["answer_positions"] = ex.answer_positions;
    h["path_positions"] = ex.path_positions;
    h["shapes"] = {{"L", ex.layers}, {"H", ex.heads}, {"A", ex.answer_count()}, {"T", ex.token_count()},
                   {"d", ex.dim},    {"N", ex.triple_count}, {"G", ex.generated_count()}};
    h["flags"] = flags;
    h["layers"] = {{"answer_hidden", ex.hidden_layer}, {"triple_embeddings", ex.triple_layer}};
    h["output_text"] = ex.output_text;
    h["gold_answers"] = ex.gold_answers;

    const std::span<const float> tensors[] = {ex.attention, ex.answer_hidden, ex.triple_embeddings,
                                              ex.token_logprob, ex.token_maxprob};
    return encode_container(h, tensors);
}

Bytes read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TraceExample read_trace_file(const std::filesystem::path& path) { return parse_trace(read_bytes(path)); }

void write_trace_file(const std::filesystem::path& path, const TraceExample& ex) {
    write_bytes(path, write_trace(ex));
}

TraceDataset read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw InputError("cannot open manifest " + manifest_path.string());
    TraceDataset ds;
    const auto base = manifest_path.parent_path();
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestEntry e{j.at("id").get<std::string>(), j.at("path").get<std::string>()};
            if (e.path.is_relative()) e.path = base / e.path;
            ds.manifest.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw InputError("malformed manifest line in " + manifest_path.string() + ": " + e.what());
        }
    }
    return ds;
}

void write_manifest(const std::filesystem::path& manifest_path, std::span<const ManifestEntry> entries) {
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + manifest_path.string());
    for (const auto& e : entries) {
        out << nlohmann::json{{"id", e.id}, {"path", e.path.generic_string()}}.dump() << '\n';
    }
}

TraceDataset open_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InputError("trace directory does not exist: " + dir.string());
    if (fs::exists(dir / "manifest.jsonl")) return read_manifest(dir / "manifest.jsonl");
    TraceDataset ds;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ggat") {
            ds.manifest.push_back({entry.path().stem().string(), entry.path()});
        }
    }
    std::sort(ds.manifest.begin(), ds.manifest.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
    return ds;
}

ValidationReport validate_dataset(const TraceDataset& ds) {
    ValidationReport report;
    std::map<std::string, int> seen;
    for (const auto& m : ds.manifest) {
        if (++seen[m.id] == 2) report.dataset_errors.push_back("duplicate id '" + m.id + "'");
    }
    if (ds.format_version != kFormatVersion) {
        report.dataset_errors.push_back("unsupported format_version '" + ds.format_version + "'");
    }

    for (const auto& m : ds.manifest) {
        ValidationEntry e{m.id, m.path, false, "", ""};
        try {
            const auto ex = read_trace_file(m.path);
            if (ex.id != m.id) throw InvariantError("file id '" + ex.id + "' does not match manifest id");
            e.ok = true;
        } catch (const Error& err) {
            e.error_kind = err.kind();
            e.message = err.what();
        }
        (e.ok ? report.passed : report.failed) += 1;
        report.entries.push_back(std::move(e));
    }
    std::stable_sort(report.entries.begin(), report.entries.end(),
                     [](const ValidationEntry& a, const ValidationEntry& b) { return a.id < b.id; });
    return report;
}

nlohmann::json to_json(const ValidationReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        nlohmann::json j = {{"id", e.id}, {"path", e.path.generic_string()}, {"ok", e.ok}};
        if (!e.ok) {
            j["error"] = e.error_kind;
            j["message"] = e.message;
        }
        entries.push_back(std::move(j));
    }
    return {{"entries", entries},
            {"dataset_errors", report.dataset_errors},
            {"passed", report.passed},
            {"failed", report.failed},
            {"format_version", std::string(kFormatVersion)}};
}

std::vector<TraceExample> load_dataset(const TraceDataset& ds) {
    std::vector<TraceExample> out;
    out.reserve(ds.manifest.size());
    for (const auto& m : ds.manifest) {
        try {
            out.push_back(read_trace_file(m.path));
        } catch (const Error& e) {
            throw StageError("load", m.id, std::string(e.kind()) + ": " + e.what());
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const TraceExample& a, const TraceExample& b) { return a.id < b.id; });
    return out;
}

} // namespace gga::trace
