#include <gga/graph.hpp>

#include <gga/error.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace gga::graph {

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max() / 4;

bool touches(const Triple& t, const EntitySet& s) {
    return s.contains(t.head) || s.contains(t.tail);
}

// Undirected multigraph over interned entity ids.
struct Adjacency {
    std::unordered_map<std::string, int> ids;
    std::vector<std::vector<int>> neighbours;
    std::vector<std::pair<int, int>> edges; // per triple

    explicit Adjacency(std::span<const Triple> triples) {
        edges.reserve(triples.size());
        for (const auto& t : triples) {
            const int h = intern(t.head);
            const int r = intern(t.tail);
            edges.emplace_back(h, r);
            if (h != r) {
                neighbours[h].push_back(r);
                neighbours[r].push_back(h);
            }
        }
    }

    int intern(const std::string& name) {
        auto [it, inserted] = ids.try_emplace(name, static_cast<int>(ids.size()));
        if (inserted) neighbours.emplace_back();
        return it->second;
    }

    std::optional<int> find(const std::string& name) const {
        auto it = ids.find(name);
        if (it == ids.end()) return std::nullopt;
        return it->second;
    }

    std::vector<int> bfs(int source, int max_depth) const {
        std::vector<int> dist(neighbours.size(), kUnreached);
        std::deque<int> queue{source};
        dist[source] = 0;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            if (dist[u] == max_depth) continue;
            for (int v : neighbours[u]) {
                if (dist[v] == kUnreached) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        return dist;
    }
};

} // namespace

std::vector<Triple> collapse_duplicates(std::span<const Triple> triples) {
    std::vector<Triple> out;
    std::set<Triple> seen;
    for (const auto& t : triples) {
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

EntitySet entities_of(std::span<const Triple> triples) {
    EntitySet out;
    for (const auto& t : triples) {
        out.insert(t.head);
        out.insert(t.tail);
    }
    return out;
}

std::vector<Triple> shortest_paths(const Subgraph& g, int max_depth) {
    if (g.question_entities.empty() || g.answer_entities.empty()) {
        throw InputError("shortest_paths: question and answer entity sets must be non-empty");
    }
    if (max_depth < 1) throw InputError("shortest_paths: max_depth must be >= 1");

    const auto triples = collapse_duplicates(g.triples);
    const Adjacency adj(triples);

    std::unordered_map<int, std::vector<int>> answer_dist;
    for (const auto& a : g.answer_entities) {
        if (auto id = adj.find(a)) answer_dist.emplace(*id, adj.bfs(*id, max_depth));
    }

    std::vector<bool> on_path(triples.size(), false);
    bool connected = false;
    for (const auto& q : g.question_entities) {
        const auto qid = adj.find(q);
        if (!qid) continue;
        const auto dq = adj.bfs(*qid, max_depth);
        for (const auto& [aid, da] : answer_dist) {
            const int length = dq[aid];
            // A question entity that is also an answer entity has no path edges.
            if (aid == *qid || length > max_depth) continue;
            connected = true;
            for (std::size_t e = 0; e < triples.size(); ++e) {
                const auto [h, t] = adj.edges[e];
                if (h == t) continue;
                if (dq[h] + 1 + da[t] == length || dq[t] + 1 + da[h] == length) on_path[e] = true;
            }
        }
    }
    if (!connected) {
        throw ReachabilityError("no question entity reaches an answer entity within " +
                                std::to_string(max_depth) + " hops");
    }

    std::vector<Triple> out;
    for (std::size_t e = 0; e < triples.size(); ++e) {
        if (on_path[e]) out.push_back(triples[e]);
    }
    return out;
}

int score_triple(const Triple& t, const EntitySet& path_entities, const EntitySet& question_entities,
                 const EntitySet& answer_entities, ScoreRule rule) {
    const bool question_conn = touches(t, question_entities);
    const bool answer_conn = touches(t, answer_entities);
    if (rule == ScoreRule::kIndependent) {
        return 3 * touches(t, path_entities) + 2 * question_conn + 2 * answer_conn;
    }
    bool path_conn = false;
    for (const auto* e : {&t.head, &t.tail}) {
        if (path_entities.contains(*e) && !answer_entities.contains(*e)) path_conn = true;
    }
    return 3 * path_conn + 2 * (question_conn || answer_conn);
}

std::vector<ScoredTriple> build_tes(const Subgraph& g, std::span<const Triple> path_triples,
                                    ScoreRule rule) {
    const auto triples = collapse_duplicates(g.triples);
    const std::set<Triple> path_set(path_triples.begin(), path_triples.end());
    const auto path_entities = entities_of(path_triples);

    std::vector<ScoredTriple> out;
    for (const auto& t : triples) {
        if (path_set.contains(t) || !touches(t, path_entities)) continue;
        out.push_back({t, score_triple(t, path_entities, g.question_entities, g.answer_entities, rule)});
    }
    // stable_sort keeps subgraph order among equal scores
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredTriple& a, const ScoredTriple& b) { return a.score > b.score; });
    return out;
}

PrunedSubgraph prune_subgraph(const Subgraph& g, const PruneOptions& options) {
    if (options.k == 0) throw InputError("prune_subgraph: k must be positive");
    const auto path = shortest_paths(g, options.max_depth);

    PrunedSubgraph out;
    for (const auto& t : path) {
        out.triples.push_back(t);
        out.is_path.push_back(true);
        out.tes_scores.emplace_back();
    }
    if (path.size() >= options.k) {
        out.distinct_count = path.size();
        out.over_budget = path.size() > options.k;
        return out;
    }

    const auto tes = build_tes(g, path, options.rule);
    for (const auto& c : tes) {
        if (out.triples.size() == options.k) break;
        out.triples.push_back(c.triple);
        out.is_path.push_back(false);
        out.tes_scores.emplace_back(c.score);
    }
    out.distinct_count = out.triples.size();
    for (std::size_t i = 0; out.triples.size() < options.k; ++i) {
        const std::size_t src = i % out.distinct_count;
        out.triples.push_back(out.triples[src]);
        out.is_path.push_back(out.is_path[src]);
        out.tes_scores.push_back(out.tes_scores[src]);
    }
    return out;
}

std::string to_string(const Triple& t) {
    return "(" + t.head + ", " + t.relation + ", " + t.tail + ")";
}

nlohmann::json triple_to_json(const Triple& t) {
    return nlohmann::json::array({t.head, t.relation, t.tail});
}

Triple triple_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw InputError("triple must be a [head, relation, tail] array");
    Triple t;
    t.head = j[0].get<std::string>();
    t.relation = j[1].get<std::string>();
    t.tail = j[2].get<std::string>();
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
        throw InputError("triple fields must be non-empty: " + j.dump());
    }
    return t;
}

SubgraphRecord subgraph_record_from_json(const nlohmann::json& j) {
    SubgraphRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.question = j.value("question", std::string{});
        r.gold_answers = j.value("gold_answers", std::vector<std::string>{});
        for (const auto& e : j.at("question_entities")) r.subgraph.question_entities.insert(e.get<std::string>());
        for (const auto& e : j.at("answer_entities")) r.subgraph.answer_entities.insert(e.get<std::string>());
        for (const auto& t : j.at("triples")) r.subgraph.triples.push_back(triple_from_json(t));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed subgraph record: ") + e.what());
    }
    return r;
}

nlohmann::json to_json(const SubgraphRecord& r) {
    nlohmann::json triples = nlohmann::json::array();
    for (const auto& t : r.subgraph.triples) triples.push_back(triple_to_json(t));
    return {
        {"id", r.id},
        {"question", r.question},
        {"question_entities", r.subgraph.question_entities},
        {"answer_entities", r.subgraph.answer_entities},
        {"gold_answers", r.gold_answers},
        {"triples", triples},
    };
}

std::vector<SubgraphRecord> read_subgraphs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open subgraph file " + path.string());
    std::vector<SubgraphRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(subgraph_record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace gga::graph
