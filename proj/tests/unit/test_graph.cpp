#include <gga/error.hpp>
#include <gga/graph.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace gga;
using namespace gga::graph;

namespace {

Subgraph titanic() {
    Subgraph g;
    g.triples = {
        {"Titanic", "hasGenre", "Romance"},
        {"Titanic", "directedBy", "James_Cameron"},
        {"Romance", "isGenreOf", "Notebook"},
        {"James_Cameron", "nationality", "American"},
    };
    g.question_entities = {"Titanic"};
    g.answer_entities = {"Romance"};
    return g;
}

std::set<Triple> as_set(const std::vector<Triple>& v) { return {v.begin(), v.end()}; }

} // namespace

TEST(ShortestPaths, SingleEdge) {
    Subgraph g;
    g.triples = {{"Titanic", "hasGenre", "Romance"}};
    g.question_entities = {"Titanic"};
    g.answer_entities = {"Romance"};
    EXPECT_EQ(shortest_paths(g), g.triples);
}

TEST(ShortestPaths, ParallelEdgesBothKept) {
    Subgraph g;
    g.triples = {{"Titanic", "hasGenre", "Romance"}, {"Titanic", "taggedAs", "Romance"}};
    g.question_entities = {"Titanic"};
    g.answer_entities = {"Romance"};
    EXPECT_EQ(as_set(shortest_paths(g)), as_set(g.triples));
}

TEST(ShortestPaths, ReverseDirectionTraversed) {
    Subgraph g;
    g.triples = {{"Romance", "isGenreOf", "Titanic"}};
    g.question_entities = {"Titanic"};
    g.answer_entities = {"Romance"};
    EXPECT_EQ(shortest_paths(g).size(), 1U);
}

TEST(ShortestPaths, ChainWithDetour) {
    // q - m - a is the 2-hop chain; q - d1 - d2 - d3 - a is a 4-hop detour.
    Subgraph g;
    g.triples = {
        {"q", "r", "m"},   {"m", "r", "a"},   {"a", "r", "x1"}, {"x1", "r", "x2"}, {"x2", "r", "x3"},
        {"q", "r", "d1"},  {"d1", "r", "d2"}, {"d2", "r", "d3"}, {"d3", "r", "a"}, {"x3", "r", "x4"},
    };
    g.question_entities = {"q"};
    g.answer_entities = {"a"};
    const auto got = as_set(shortest_paths(g));
    EXPECT_EQ(got, (std::set<Triple>{{"q", "r", "m"}, {"m", "r", "a"}}));
    bool connected = false;
    EXPECT_EQ(got, oracle::shortest_path_triples(g, 3, connected));
    EXPECT_TRUE(connected);
}

TEST(ShortestPaths, UnreachableThrows) {
    Subgraph g;
    g.triples = {{"a", "r", "b"}, {"c", "r", "d"}};
    g.question_entities = {"a"};
    g.answer_entities = {"d"};
    EXPECT_THROW(shortest_paths(g), ReachabilityError);
}

TEST(ShortestPaths, DepthLimit) {
    Subgraph g;
    g.triples = {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "d"}, {"d", "r", "e"}};
    g.question_entities = {"a"};
    g.answer_entities = {"e"};
    EXPECT_THROW(shortest_paths(g, 3), ReachabilityError);
    EXPECT_EQ(shortest_paths(g, 4).size(), 4U);
}

TEST(ShortestPaths, EmptyEntitySetsRejected) {
    Subgraph g;
    g.triples = {{"a", "r", "b"}};
    g.question_entities = {"a"};
    EXPECT_THROW(shortest_paths(g), InputError);
}

TEST(ShortestPaths, MatchesExhaustiveEnumeration) {
    Rng rng(7);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        const auto g = oracle::random_subgraph(rng, 12, 24);
        bool connected = false;
        const auto expected = oracle::shortest_path_triples(g, 3, connected);
        if (!connected) {
            EXPECT_THROW(shortest_paths(g), ReachabilityError);
            continue;
        }
        EXPECT_EQ(as_set(shortest_paths(g)), expected) << "graph " << i;
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(ScoreTriple, WorkedExample) {
    const auto g = titanic();
    const EntitySet path{"Titanic", "Romance"};
    const int expected[] = {5, 5, 2, 0};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(score_triple(g.triples[i], path, g.question_entities, g.answer_entities), expected[i])
            << to_string(g.triples[i]);
    }
}

TEST(ScoreTriple, IndependentRuleDiffersOnAnswerTouch) {
    const auto g = titanic();
    const EntitySet path{"Titanic", "Romance"};
    EXPECT_EQ(score_triple(g.triples[0], path, g.question_entities, g.answer_entities, ScoreRule::kIndependent), 7);
    EXPECT_EQ(score_triple(g.triples[2], path, g.question_entities, g.answer_entities, ScoreRule::kIndependent), 5);
}

TEST(ScoreTriple, RangeProperty) {
    const std::set<int> allowed{0, 2, 3, 4, 5, 7};
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        auto pick = [&] { return "e" + std::to_string(rng.below(6)); };
        EntitySet path;
        EntitySet q;
        EntitySet a;
        for (int k = 0; k < 3; ++k) {
            if (rng.bernoulli(0.5)) path.insert(pick());
            if (rng.bernoulli(0.3)) q.insert(pick());
            if (rng.bernoulli(0.3)) a.insert(pick());
        }
        const Triple t{pick(), "r", pick()};
        for (auto rule : {ScoreRule::kAnchored, ScoreRule::kIndependent}) {
            EXPECT_TRUE(allowed.count(score_triple(t, path, q, a, rule)));
        }
    }
}

TEST(BuildTes, PathOnlyGraphIsEmpty) {
    Subgraph g;
    g.triples = {{"a", "r", "b"}};
    g.question_entities = {"a"};
    g.answer_entities = {"b"};
    EXPECT_TRUE(build_tes(g, g.triples).empty());
}

TEST(BuildTes, WorkedExampleOrder) {
    const auto g = titanic();
    const auto path = shortest_paths(g);
    ASSERT_EQ(path, std::vector<Triple>{g.triples[0]});
    const auto tes = build_tes(g, path);
    ASSERT_EQ(tes.size(), 2U); // the nationality triple is not incident to the path
    EXPECT_EQ(tes[0].triple, g.triples[1]);
    EXPECT_EQ(tes[0].score, 5);
    EXPECT_EQ(tes[1].triple, g.triples[2]);
    EXPECT_EQ(tes[1].score, 2);
}

TEST(BuildTes, CandidateSetComprehension) {
    Rng rng(11);
    int checked = 0;
    while (checked < 50) {
        auto g = oracle::random_subgraph(rng, 10, 30);
        std::vector<Triple> path;
        try {
            path = shortest_paths(g);
        } catch (const ReachabilityError&) {
            continue;
        }
        ++checked;
        const auto path_set = as_set(path);
        const auto ents = entities_of(path);
        std::set<Triple> expected;
        for (const auto& t : g.triples) {
            if (!path_set.count(t) && (ents.count(t.head) || ents.count(t.tail))) expected.insert(t);
        }
        const auto tes = build_tes(g, path);
        std::set<Triple> got;
        for (const auto& c : tes) got.insert(c.triple);
        EXPECT_EQ(got, expected);
        EXPECT_EQ(got.size(), tes.size()) << "duplicates collapsed";
        for (std::size_t i = 1; i < tes.size(); ++i) EXPECT_GE(tes[i - 1].score, tes[i].score);
    }
}

TEST(BuildTes, TiesKeepInputOrder) {
    Subgraph g;
    g.triples = {{"a", "r", "b"}, {"b", "r", "z3"}, {"b", "r", "z1"}, {"b", "r", "z2"}};
    g.question_entities = {"a"};
    g.answer_entities = {"b"};
    const auto tes = build_tes(g, shortest_paths(g));
    ASSERT_EQ(tes.size(), 3U);
    EXPECT_EQ(tes[0].triple.tail, "z3");
    EXPECT_EQ(tes[1].triple.tail, "z1");
    EXPECT_EQ(tes[2].triple.tail, "z2");
}

TEST(Prune, TwoPathPlusThirtyCandidates) {
    Subgraph g;
    g.triples = {{"q", "r", "m"}, {"m", "r", "a"}};
    for (int i = 0; i < 30; ++i) g.triples.push_back({"m", "n" + std::to_string(i), "x" + std::to_string(i)});
    g.question_entities = {"q"};
    g.answer_entities = {"a"};
    const auto p = prune_subgraph(g);
    ASSERT_EQ(p.triples.size(), 20U);
    EXPECT_TRUE(p.is_path[0] && p.is_path[1]);
    for (std::size_t i = 2; i < 20; ++i) {
        EXPECT_FALSE(p.is_path[i]);
        EXPECT_EQ(p.triples[i], g.triples[i]); // equal scores keep input order
        EXPECT_EQ(p.tes_scores[i], 3);
    }
    EXPECT_EQ(p.distinct_count, 20U);
    EXPECT_FALSE(p.over_budget);
}

TEST(Prune, SingleTripleCycles) {
    Subgraph g;
    g.triples = {{"a", "r", "b"}};
    g.question_entities = {"a"};
    g.answer_entities = {"b"};
    const auto p = prune_subgraph(g, {.k = 4});
    ASSERT_EQ(p.triples.size(), 4U);
    for (const auto& t : p.triples) EXPECT_EQ(t, g.triples[0]);
    EXPECT_EQ(p.distinct_count, 1U);
}

TEST(Prune, CyclingMatchesSimulation) {
    // three path triples plus five candidates
    Subgraph g;
    g.triples = {{"q", "r", "m1"}, {"m1", "r", "m2"}, {"m2", "r", "a"}};
    for (int i = 0; i < 5; ++i) g.triples.push_back({"m1", "s", "y" + std::to_string(i)});
    g.question_entities = {"q"};
    g.answer_entities = {"a"};
    const auto p = prune_subgraph(g);
    ASSERT_EQ(p.triples.size(), 20U);
    EXPECT_EQ(p.distinct_count, 8U);
    std::vector<Triple> sim(p.triples.begin(), p.triples.begin() + 8);
    while (sim.size() < 20) sim.push_back(sim[sim.size() - 8]);
    EXPECT_EQ(p.triples, sim);
    for (std::size_t i = 8; i < 20; ++i) {
        EXPECT_EQ(p.is_path[i], p.is_path[i - 8]);
        EXPECT_EQ(p.tes_scores[i], p.tes_scores[i - 8]);
    }
}

TEST(Prune, OverBudgetKeepsAllPathTriples) {
    Subgraph g;
    for (int i = 0; i < 5; ++i) {
        g.triples.push_back({"q", "r", "m" + std::to_string(i)});
        g.triples.push_back({"m" + std::to_string(i), "r", "a"});
    }
    g.question_entities = {"q"};
    g.answer_entities = {"a"};
    const auto p = prune_subgraph(g, {.k = 4});
    EXPECT_EQ(p.triples.size(), 10U);
    EXPECT_TRUE(p.over_budget);
    EXPECT_TRUE(std::all_of(p.is_path.begin(), p.is_path.end(), [](bool b) { return b; }));
}

TEST(Prune, RandomContract) {
    Rng rng(2024);
    int checked = 0;
    while (checked < 500) {
        const auto g = oracle::random_subgraph(rng, 12, 40);
        bool connected = false;
        const auto expected = oracle::shortest_path_triples(g, 3, connected);
        if (!connected) continue;
        ++checked;
        const auto p = prune_subgraph(g);
        if (expected.size() <= 20) {
            EXPECT_EQ(p.triples.size(), 20U);
        }
        std::size_t prefix = 0;
        // cyclic padding may repeat path triples, so only the distinct selection counts
        while (prefix < p.distinct_count && p.is_path[prefix]) ++prefix;
        EXPECT_EQ(prefix, expected.size());
        EXPECT_EQ(std::set<Triple>(p.triples.begin(), p.triples.begin() + static_cast<std::ptrdiff_t>(prefix)), expected);
        for (std::size_t i = prefix; i < p.distinct_count; ++i) {
            EXPECT_FALSE(p.is_path[i]);
            if (i > prefix) {
                EXPECT_GE(*p.tes_scores[i - 1], *p.tes_scores[i]);
            }
        }
        EXPECT_EQ(prune_subgraph(g).triples, p.triples);
    }
}

TEST(Prune, ZeroKRejected) {
    EXPECT_THROW(prune_subgraph(titanic(), {.k = 0}), InputError);
}

TEST(SubgraphJson, RoundTrip) {
    SubgraphRecord r;
    r.id = "ex1";
    r.question = "what genre is Titanic";
    r.gold_answers = {"Romance"};
    r.subgraph = titanic();
    const auto back = subgraph_record_from_json(to_json(r));
    EXPECT_EQ(back.id, r.id);
    EXPECT_EQ(back.question, r.question);
    EXPECT_EQ(back.gold_answers, r.gold_answers);
    EXPECT_EQ(back.subgraph.triples, r.subgraph.triples);
    EXPECT_EQ(back.subgraph.question_entities, r.subgraph.question_entities);
}

TEST(SubgraphJson, MalformedTriple) {
    EXPECT_THROW(triple_from_json(nlohmann::json::array({"a", "b"})), InputError);
    EXPECT_THROW(triple_from_json(nlohmann::json::array({"a", "", "c"})), InputError);
    EXPECT_THROW(subgraph_record_from_json(nlohmann::json{{"id", "x"}}), InputError);
}
