#include <gga/error.hpp>
#include <gga/metrics.hpp>
#include <gga/synth.hpp>
#include <gga/trace.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace gga;
using namespace gga::synth;

TEST(GenTrace, ValidAndDeterministic) {
    SynthSpec spec;
    spec.seed = 9;
    const auto a = trace::write_trace(gen_trace(spec));
    EXPECT_EQ(a, trace::write_trace(gen_trace(spec)));
    spec.seed = 10;
    EXPECT_NE(a, trace::write_trace(gen_trace(spec)));
}

TEST(GenTrace, HitsTargetsAcrossShapes) {
    Rng rng(1);
    for (int i = 0; i < 40; ++i) {
        SynthSpec spec;
        spec.seed = static_cast<std::uint64_t>(i);
        spec.layers = 1 + rng.below(4);
        spec.heads = 1 + rng.below(4);
        spec.answer_count = 1 + rng.below(3);
        spec.tokens = spec.answer_count + 2 + rng.below(12);
        spec.path_count = 1 + rng.below(spec.tokens - spec.answer_count - 1);
        spec.triple_count = 1 + rng.below(5);
        spec.dim = 3 + rng.below(10);
        spec.alpha_s_target = rng.uniform();
        spec.sas_target = rng.uniform();
        spec.normalized = rng.bernoulli(0.5);
        const auto ex = gen_trace(spec);
        EXPECT_NEAR(metrics::prd(ex).prd, 2.0 * spec.alpha_s_target - 1.0, 1e-6) << i;
        EXPECT_NEAR(oracle::prd(ex), 2.0 * spec.alpha_s_target - 1.0, 1e-6) << i;
        EXPECT_NEAR(metrics::sas(ex).sas, spec.sas_target, 1e-6) << i;
    }
}

TEST(GenTrace, SpecChecks) {
    SynthSpec spec;
    spec.alpha_s_target = 1.5;
    EXPECT_THROW(gen_trace(spec), SpecError);
    spec = {};
    spec.path_count = spec.tokens;
    EXPECT_THROW(gen_trace(spec), SpecError);
    spec = {};
    spec.dim = 2;
    spec.triple_count = 3;
    EXPECT_THROW(check_spec(spec), SpecError);
    spec.triple_count = 1;
    EXPECT_NO_THROW(check_spec(spec));
}

TEST(GenTrace, SpecJsonRoundTrip) {
    SynthSpec spec;
    spec.id = "x";
    spec.layers = 3;
    spec.sas_target = 0.25;
    spec.normalized = false;
    const auto back = spec_from_json(to_json(spec));
    EXPECT_EQ(to_json(back), to_json(spec));
    EXPECT_EQ(spec_from_json(nlohmann::json::object()).layers, SynthSpec{}.layers);
}

TEST(FeatureDataset, ShapeAndDeterminism) {
    const auto a = gen_feature_dataset(200, 3.0, 5);
    const auto b = gen_feature_dataset(200, 3.0, 5);
    EXPECT_EQ(a.features.values.data(), b.features.values.data());
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.features.columns.size(), 9U);
    EXPECT_EQ(a.features.ids.size(), 200U);
    EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), 1), 100);
    EXPECT_THROW(gen_feature_dataset(5, 1.0, 1), SpecError);
    EXPECT_THROW(gen_feature_dataset(100, -1.0, 1), SpecError);
}

TEST(FeatureDataset, SeparationMovesMeans) {
    const auto ds = gen_feature_dataset(2000, 4.0, 42);
    double prd[2] = {0, 0};
    double sas[2] = {0, 0};
    for (std::size_t r = 0; r < ds.labels.size(); ++r) {
        prd[ds.labels[r]] += ds.features.values(r, 0) / 1000.0;
        sas[ds.labels[r]] += ds.features.values(r, 1) / 1000.0;
    }
    // +-2 sigma around the centre for each class
    EXPECT_NEAR(prd[1] - prd[0], 4.0 * kFeatureSigma, 0.01);
    EXPECT_NEAR(sas[0] - sas[1], 4.0 * kFeatureSigma, 0.01);
}

TEST(PlantedFixture, Deterministic) {
    const auto a = planted_quadrant_fixture();
    const auto b = planted_quadrant_fixture();
    EXPECT_EQ(a.prd, b.prd);
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Dataset, WritesValidDeterministicFiles) {
    testutil::TempDir a;
    testutil::TempDir b;
    DatasetOptions options;
    options.n = 8;
    gen_dataset(a.path(), options);
    gen_dataset(b.path(), options);
    const auto ha = testutil::hash_tree(a.path());
    EXPECT_EQ(ha, testutil::hash_tree(b.path()));
    EXPECT_TRUE(ha.count("subgraphs.jsonl"));
    EXPECT_TRUE(ha.count("traces/manifest.jsonl"));
    EXPECT_TRUE(ha.count("embeddings.ggat"));
    EXPECT_TRUE(ha.count("nli.csv"));
    const auto report = trace::validate_dataset(trace::open_dataset(a / "traces"));
    EXPECT_EQ(report.passed, 8U);
    EXPECT_TRUE(report.ok());
}
