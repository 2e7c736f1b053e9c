#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gga::trace {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::string_view kMagic = "GGAT1";
inline constexpr std::string_view kFormatVersion = "GGAT1";
// Exporters encode causally masked raw scores with this value.
inline constexpr float kMaskedScore = -3.40282347e+38F;
inline constexpr double kRowSumTolerance = 1e-3;

/// Model internals captured for one QA episode.
///
/// Tensors are stored flat, row-major:
///   attention          [L][H][|A|][T]   answer rows only
///   answer_hidden      [|A|][d]
///   triple_embeddings  [N][d]           already pooled per triple
///   token_logprob      [G]              log-probability of each emitted token
///   token_maxprob      [G]              max vocabulary probability per step
struct TraceExample {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<std::size_t> answer_positions;
    std::vector<std::size_t> path_positions;
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t dim = 0;
    std::size_t triple_count = 0;
    std::vector<float> attention;
    std::vector<float> answer_hidden;
    std::vector<float> triple_embeddings;
    std::vector<float> token_logprob;
    std::vector<float> token_maxprob;
    std::string output_text;
    std::vector<std::string> gold_answers;
    bool attention_normalized = true;
    // Layer indices the hidden states and triple encodings were taken from.
    int hidden_layer = -1;
    int triple_layer = -1;
    // Header content this version does not interpret; written back verbatim.
    nlohmann::json extra_header = nlohmann::json::object();
    nlohmann::json extra_flags = nlohmann::json::object();

    std::size_t token_count() const { return tokens.size(); }
    std::size_t answer_count() const { return answer_positions.size(); }
    std::size_t generated_count() const { return token_logprob.size(); }

    std::span<const float> attention_row(std::size_t layer, std::size_t head, std::size_t answer) const;
    std::span<const float> hidden_row(std::size_t answer) const;
    std::span<const float> triple_row(std::size_t triple) const;
};

// Shape consistency of the in-memory tensors; throws ShapeError.
void check_shapes(const TraceExample& ex);

// Full invariant check (shapes first); throws ShapeError or InvariantError.
void validate(const TraceExample& ex);

/// Parses a GGAT1 trace: 5-byte magic, u64 little-endian header length, UTF-8
/// JSON header, then little-endian f32 tensors in the order attention,
/// answer_hidden, triple_embeddings, token_logprob, token_maxprob.
///
/// Throws FormatError (magic, truncation, malformed header), ShapeError
/// (header/payload disagreement) or InvariantError.
TraceExample parse_trace(std::span<const std::uint8_t> bytes);

// Canonical serialization; validates first.
Bytes write_trace(const TraceExample& ex);

TraceExample read_trace_file(const std::filesystem::path& path);
void write_trace_file(const std::filesystem::path& path, const TraceExample& ex);

Bytes read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Generic container shared by the trace and embedding files.
struct Container {
    nlohmann::json header;
    std::span<const std::uint8_t> payload;
};
Container decode_container(std::span<const std::uint8_t> bytes);
Bytes encode_container(const nlohmann::json& header, std::span<const std::span<const float>> tensors);

// Reads `count` little-endian floats at `offset`, advancing it. Throws
// FormatError naming `what` if the payload is too short.
std::vector<float> read_f32(std::span<const std::uint8_t> payload, std::size_t& offset, std::size_t count,
                            std::string_view what);

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;
};

struct TraceDataset {
    std::vector<ManifestEntry> manifest;
    std::string format_version = std::string(kFormatVersion);
};

// JSON-lines {"id", "path"}; relative paths resolve against the manifest's directory.
TraceDataset read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, std::span<const ManifestEntry> entries);

// A directory with manifest.jsonl, or else every *.ggat file in it (id = stem).
TraceDataset open_dataset(const std::filesystem::path& dir);

struct ValidationEntry {
    std::string id;
    std::filesystem::path path;
    bool ok = false;
    std::string error_kind;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries; // sorted by id
    std::vector<std::string> dataset_errors;
    std::size_t passed = 0;
    std::size_t failed = 0;

    bool ok() const { return failed == 0 && dataset_errors.empty(); }
};

ValidationReport validate_dataset(const TraceDataset& ds);
nlohmann::json to_json(const ValidationReport& report);

// Loads every trace of the dataset in id order; throws on the first bad file.
std::vector<TraceExample> load_dataset(const TraceDataset& ds);

} // namespace gga::trace
