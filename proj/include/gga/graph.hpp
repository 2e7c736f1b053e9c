#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gga::graph {

using EntitySet = std::set<std::string>;

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;

    auto operator<=>(const Triple&) const = default;
    bool operator==(const Triple&) const = default;
};

struct Subgraph {
    std::vector<Triple> triples;
    EntitySet question_entities;
    EntitySet answer_entities;
};

// One line of the subgraph JSON-lines input.
struct SubgraphRecord {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
    Subgraph subgraph;
};

// How TES candidates are scored against the path / question / answer sets.
enum class ScoreRule {
    // PathConn looks at path entities other than answer entities, and the
    // question and answer bonuses are exclusive with the question bonus taking
    // precedence. Scores the Titanic worked example 5, 5, 2, 0; scores in {0,2,3,5}.
    kAnchored,
    // Each indicator is 1 iff {head, tail} meets the respective set.
    // Scores in {0,2,3,4,5,7}.
    kIndependent,
};

struct ScoredTriple {
    Triple triple;
    int score = 0;
};

struct PruneOptions {
    std::size_t k = 20;
    int max_depth = 3;
    ScoreRule rule = ScoreRule::kAnchored;
};

struct PrunedSubgraph {
    std::vector<Triple> triples;
    // Aligned with triples.
    std::vector<bool> is_path;
    // Aligned with triples; empty for path triples.
    std::vector<std::optional<int>> tes_scores;
    // Distinct triples selected before cyclic padding.
    std::size_t distinct_count = 0;
    // True when the path alone exceeded k and was emitted untruncated.
    bool over_budget = false;
};

// Removes repeated (head, relation, tail) keys, keeping first occurrences.
std::vector<Triple> collapse_duplicates(std::span<const Triple> triples);

// Heads and tails of the given triples.
EntitySet entities_of(std::span<const Triple> triples);

/// Union of triples on any minimal-length undirected path from a question
/// entity to an answer entity, per (question, answer) pair, within max_depth
/// hops. Returned in subgraph order with duplicates collapsed.
///
/// Throws InputError when either entity set is empty and ReachabilityError when
/// no pair is connected within max_depth.
std::vector<Triple> shortest_paths(const Subgraph& g, int max_depth = 3);

int score_triple(const Triple& t, const EntitySet& path_entities, const EntitySet& question_entities,
                 const EntitySet& answer_entities, ScoreRule rule = ScoreRule::kAnchored);

/// Triples of g incident to any path entity, minus the path triples, scored and
/// sorted by score descending then subgraph order.
std::vector<ScoredTriple> build_tes(const Subgraph& g, std::span<const Triple> path_triples,
                                    ScoreRule rule = ScoreRule::kAnchored);

/// Path triples first, then the best TES triples up to k, then cyclic repeats
/// of the selection until exactly k. A path longer than k is emitted whole.
PrunedSubgraph prune_subgraph(const Subgraph& g, const PruneOptions& options = {});

std::string to_string(const Triple& t);

SubgraphRecord subgraph_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SubgraphRecord& record);
std::vector<SubgraphRecord> read_subgraphs(const std::filesystem::path& path);

nlohmann::json triple_to_json(const Triple& t);
Triple triple_from_json(const nlohmann::json& j);

} // namespace gga::graph
