#include <gga/error.hpp>
#include <gga/trace.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

using namespace gga;
using namespace gga::trace;

namespace {

TraceExample minimal() {
    TraceExample ex;
    ex.id = "min";
    ex.tokens = {"Titanic", "hasGenre", "Romance", "Romance"};
    ex.answer_positions = {3};
    ex.path_positions = {0, 1, 2};
    ex.layers = 1;
    ex.heads = 1;
    ex.dim = 2;
    ex.triple_count = 1;
    ex.attention = {0.25F, 0.25F, 0.5F, 0.0F};
    ex.answer_hidden = {1.0F, 0.0F};
    ex.triple_embeddings = {0.5F, 0.5F};
    ex.token_logprob = {-0.5F};
    ex.token_maxprob = {0.75F};
    ex.output_text = "ans: Romance";
    ex.gold_answers = {"Romance"};
    return ex;
}

void expect_same(const TraceExample& a, const TraceExample& b) {
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.answer_positions, b.answer_positions);
    EXPECT_EQ(a.path_positions, b.path_positions);
    EXPECT_EQ(a.layers, b.layers);
    EXPECT_EQ(a.heads, b.heads);
    EXPECT_EQ(a.dim, b.dim);
    EXPECT_EQ(a.triple_count, b.triple_count);
    EXPECT_EQ(a.attention, b.attention);
    EXPECT_EQ(a.answer_hidden, b.answer_hidden);
    EXPECT_EQ(a.triple_embeddings, b.triple_embeddings);
    EXPECT_EQ(a.token_logprob, b.token_logprob);
    EXPECT_EQ(a.token_maxprob, b.token_maxprob);
    EXPECT_EQ(a.output_text, b.output_text);
    EXPECT_EQ(a.gold_answers, b.gold_answers);
    EXPECT_EQ(a.attention_normalized, b.attention_normalized);
}

std::uint64_t header_len(const Bytes& b) {
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= std::uint64_t{b[5 + i]} << (8 * i);
    return n;
}

std::size_t payload_offset(const Bytes& b) { return 13 + header_len(b); }

void put_f32(Bytes& b, std::size_t at, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

Bytes with_header(const Bytes& b, const nlohmann::json& header) {
    const auto text = header.dump();
    Bytes out(b.begin(), b.begin() + 5);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(std::uint64_t{text.size()} >> (8 * i)));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(payload_offset(b)), b.end());
    return out;
}

template <class E>
std::string thrown_message(const Bytes& b) {
    try {
        parse_trace(b);
    } catch (const E& e) {
        return e.what();
    } catch (const std::exception& e) {
        ADD_FAILURE() << "unexpected exception: " << e.what();
        return {};
    }
    ADD_FAILURE() << "no exception";
    return {};
}

} // namespace

TEST(Trace, MinimalRoundTripIsByteIdentical) {
    const auto bytes = write_trace(minimal());
    const auto parsed = parse_trace(bytes);
    expect_same(parsed, minimal());
    EXPECT_EQ(write_trace(parsed), bytes);
}

TEST(Trace, LayoutIsLittleEndian) {
    const auto bytes = write_trace(minimal());
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "GGAT1");
    const auto hl = header_len(bytes);
    const auto header = nlohmann::json::parse(bytes.begin() + 13, bytes.begin() + 13 + static_cast<std::ptrdiff_t>(hl));
    EXPECT_EQ(header["shapes"]["T"], 4);
    EXPECT_EQ(header["shapes"]["G"], 1);
    // 4 attention + 2 hidden + 2 triple + 1 + 1 floats
    EXPECT_EQ(bytes.size(), 13 + hl + 4 * 10);
    const std::size_t p = payload_offset(bytes);
    // 0.25f == 0x3e800000
    EXPECT_EQ(bytes[p + 0], 0x00);
    EXPECT_EQ(bytes[p + 2], 0x80);
    EXPECT_EQ(bytes[p + 3], 0x3e);
}

TEST(Trace, GoldenFile) {
    const std::filesystem::path golden = std::filesystem::path(GGA_TEST_DATA_DIR) / "minimal.ggat";
    if (std::getenv("GGA_UPDATE_GOLDEN")) write_trace_file(golden, minimal());
    ASSERT_TRUE(std::filesystem::exists(golden));
    const auto bytes = read_bytes(golden);
    EXPECT_EQ(write_trace(minimal()), bytes);
    expect_same(parse_trace(bytes), minimal());
}

TEST(Trace, RandomRoundTrips) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (bool normalized : {true, false}) {
            const auto ex = oracle::random_trace(seed, normalized);
            const auto bytes = write_trace(ex);
            const auto back = parse_trace(bytes);
            expect_same(back, ex);
            EXPECT_EQ(write_trace(back), bytes);
        }
    }
}

TEST(Trace, BadMagic) {
    auto bytes = write_trace(minimal());
    bytes[0] = 'X';
    EXPECT_THROW(parse_trace(bytes), FormatError);
    EXPECT_THROW(parse_trace(Bytes{'G', 'G'}), FormatError);
}

TEST(Trace, TruncationNamesTensor) {
    const auto bytes = write_trace(minimal());
    const auto p = payload_offset(bytes);
    EXPECT_NE(thrown_message<FormatError>(Bytes(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(p + 6))).find("attention"),
              std::string::npos);
    EXPECT_NE(thrown_message<FormatError>(Bytes(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(p + 20))).find("answer_hidden"),
              std::string::npos);
    EXPECT_NE(thrown_message<FormatError>(Bytes(bytes.begin(), bytes.end() - 1)).find("token_maxprob"), std::string::npos);
    EXPECT_THROW(parse_trace(Bytes(bytes.begin(), bytes.begin() + 20)), FormatError);
}

TEST(Trace, TrailingBytesRejected) {
    auto bytes = write_trace(minimal());
    bytes.insert(bytes.end(), {0, 0, 0, 0});
    EXPECT_THROW(parse_trace(bytes), ShapeError);
}

TEST(Trace, RowSumOffIsInvariantError) {
    auto bytes = write_trace(minimal());
    // 0.25 + 0.25 + 0.4 + 0 = 0.90
    put_f32(bytes, payload_offset(bytes) + 8, 0.4F);
    EXPECT_THROW(parse_trace(bytes), InvariantError);
}

TEST(Trace, HeaderShapeMismatch) {
    const auto bytes = write_trace(minimal());
    auto header = decode_container(bytes).header;
    header["shapes"]["T"] = 5;
    EXPECT_THROW(parse_trace(with_header(bytes, header)), ShapeError);
    header = decode_container(bytes).header;
    header.erase("tokens");
    EXPECT_THROW(parse_trace(with_header(bytes, header)), FormatError);
    header = decode_container(bytes).header;
    header["path_positions"] = {0, 3};
    EXPECT_THROW(parse_trace(with_header(bytes, header)), InvariantError);
    header["path_positions"] = {2, 1};
    EXPECT_THROW(parse_trace(with_header(bytes, header)), InvariantError);
    header["path_positions"] = {9};
    EXPECT_THROW(parse_trace(with_header(bytes, header)), InvariantError);
}

TEST(Trace, ExtraKeysPreserved) {
    const auto bytes = write_trace(minimal());
    auto header = decode_container(bytes).header;
    header["exporter"] = {{"model", "tiny"}, {"revision", 3}};
    header["flags"]["causal_mask"] = true;
    const auto edited = write_trace(parse_trace(with_header(bytes, header)));
    const auto ex = parse_trace(edited);
    EXPECT_EQ(ex.extra_header["exporter"]["revision"], 3);
    EXPECT_EQ(ex.extra_flags["causal_mask"], true);
    EXPECT_EQ(write_trace(ex), edited);
    // the canonical dump of the edited header is what gets written back
    EXPECT_EQ(edited, with_header(bytes, nlohmann::json::parse(header.dump())));
}

TEST(Trace, EmptyGeneratedSequence) {
    auto ex = minimal();
    ex.token_logprob.clear();
    ex.token_maxprob.clear();
    ex.output_text.clear();
    const auto bytes = write_trace(ex);
    EXPECT_EQ(decode_container(bytes).header["shapes"]["G"], 0);
    EXPECT_EQ(bytes.size(), payload_offset(bytes) + 4 * 8);
    EXPECT_TRUE(parse_trace(bytes).token_logprob.empty());
}

TEST(Trace, WriteValidates) {
    auto ex = minimal();
    ex.attention.pop_back();
    EXPECT_THROW(write_trace(ex), ShapeError);
    ex = minimal();
    ex.token_maxprob = {1.5F};
    EXPECT_THROW(write_trace(ex), InvariantError);
    ex = minimal();
    ex.answer_hidden[0] = std::nanf("");
    EXPECT_THROW(write_trace(ex), InvariantError);
    ex = minimal();
    ex.attention_normalized = false;
    ex.attention = {kMaskedScore, kMaskedScore, kMaskedScore, kMaskedScore};
    EXPECT_THROW(write_trace(ex), InvariantError);
}

TEST(Dataset, ValidatesManifest) {
    testutil::TempDir dir;
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < 3; ++i) {
        auto ex = minimal();
        ex.id = "ex" + std::to_string(i);
        write_trace_file(dir / (ex.id + ".ggat"), ex);
        entries.push_back({ex.id, ex.id + ".ggat"});
    }
    write_manifest(dir / "manifest.jsonl", entries);
    auto report = validate_dataset(open_dataset(dir.path()));
    EXPECT_EQ(report.passed, 3U);
    EXPECT_TRUE(report.ok());

    auto bytes = read_bytes(dir / "ex1.ggat");
    bytes.resize(bytes.size() - 3);
    write_bytes(dir / "ex1.ggat", bytes);
    report = validate_dataset(open_dataset(dir.path()));
    EXPECT_EQ(report.passed, 2U);
    ASSERT_EQ(report.failed, 1U);
    EXPECT_EQ(report.entries[1].id, "ex1");
    EXPECT_EQ(report.entries[1].error_kind, "FormatError");
    EXPECT_FALSE(report.ok());
    EXPECT_EQ(to_json(report)["failed"], 1);
}

TEST(Dataset, DuplicateIds) {
    testutil::TempDir dir;
    write_trace_file(dir / "a.ggat", minimal());
    const std::vector<ManifestEntry> entries{{"min", "a.ggat"}, {"min", "a.ggat"}};
    write_manifest(dir / "manifest.jsonl", entries);
    const auto report = validate_dataset(open_dataset(dir.path()));
    ASSERT_EQ(report.dataset_errors.size(), 1U);
    EXPECT_NE(report.dataset_errors[0].find("duplicate"), std::string::npos);
    EXPECT_FALSE(report.ok());
}

TEST(Dataset, IdMismatchAndDirectoryScan) {
    testutil::TempDir dir;
    write_trace_file(dir / "other.ggat", minimal());
    const auto ds = open_dataset(dir.path());
    ASSERT_EQ(ds.manifest.size(), 1U);
    const auto report = validate_dataset(ds);
    EXPECT_EQ(report.entries[0].error_kind, "InvariantError");
    EXPECT_THROW(open_dataset(dir / "missing"), InputError);
}

TEST(Dataset, LoadSortsById) {
    testutil::TempDir dir;
    std::vector<ManifestEntry> entries;
    for (const char* id : {"c", "a", "b"}) {
        auto ex = minimal();
        ex.id = id;
        write_trace_file(dir / (std::string(id) + ".ggat"), ex);
        entries.push_back({id, std::string(id) + ".ggat"});
    }
    write_manifest(dir / "manifest.jsonl", entries);
    const auto loaded = load_dataset(open_dataset(dir.path()));
    ASSERT_EQ(loaded.size(), 3U);
    EXPECT_EQ(loaded[0].id, "a");
    EXPECT_EQ(loaded[2].id, "c");
}
