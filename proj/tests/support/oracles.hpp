#pragma once

// Brute-force reference implementations used as test oracles. They are written
// straight from the definitions and deliberately share no code with the library.

#include <gga/graph.hpp>
#include <gga/rng.hpp>
#include <gga/trace.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Random trace with L, H <= 4, |A| <= 3, T <= 16. Raw-score traces carry a few
// masked entries per row but never a fully masked row.
inline gga::trace::TraceExample random_trace(std::uint64_t seed, bool normalized) {
    gga::Rng rng(seed);
    gga::trace::TraceExample ex;
    ex.id = "r" + std::to_string(seed);
    ex.layers = 1 + rng.below(4);
    ex.heads = 1 + rng.below(4);
    const std::size_t a = 1 + rng.below(3);
    const std::size_t t = a + 2 + rng.below(16 - a - 1);
    ex.dim = 2 + rng.below(15);
    ex.triple_count = 1 + rng.below(6);
    ex.attention_normalized = normalized;
    for (std::size_t i = 0; i < t; ++i) ex.tokens.push_back("w" + std::to_string(i));

    std::vector<std::size_t> pos(t);
    for (std::size_t i = 0; i < t; ++i) pos[i] = i;
    rng.shuffle(std::span<std::size_t>(pos));
    ex.answer_positions.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(a));
    const std::size_t s = 1 + rng.below(t - a);
    ex.path_positions.assign(pos.begin() + static_cast<std::ptrdiff_t>(a),
                             pos.begin() + static_cast<std::ptrdiff_t>(a + s));
    std::sort(ex.answer_positions.begin(), ex.answer_positions.end());
    std::sort(ex.path_positions.begin(), ex.path_positions.end());

    for (std::size_t r = 0; r < ex.layers * ex.heads * a; ++r) {
        std::vector<double> row(t);
        if (normalized) {
            double sum = 0.0;
            for (auto& v : row) sum += v = rng.uniform() + 1e-3;
            for (auto& v : row) ex.attention.push_back(static_cast<float>(v / sum));
        } else {
            const std::size_t keep = rng.below(t);
            for (std::size_t j = 0; j < t; ++j) {
                const bool masked = j != keep && rng.bernoulli(0.2);
                ex.attention.push_back(masked ? gga::trace::kMaskedScore : static_cast<float>(rng.normal(0.0, 3.0)));
            }
        }
    }
    for (std::size_t i = 0; i < a * ex.dim; ++i) ex.answer_hidden.push_back(static_cast<float>(rng.normal()));
    for (std::size_t i = 0; i < ex.triple_count * ex.dim; ++i) ex.triple_embeddings.push_back(static_cast<float>(rng.normal()));
    for (std::size_t i = 0; i < a; ++i) {
        ex.token_logprob.push_back(static_cast<float>(-rng.uniform(0.01, 3.0)));
        ex.token_maxprob.push_back(static_cast<float>(rng.uniform()));
    }
    ex.output_text = "ans: something";
    ex.gold_answers = {"something"};
    return ex;
}

// Mean over (l, h, i) of sum_{j in S} alpha_j - sum_{j not in S} alpha_j.
inline double prd(const gga::trace::TraceExample& ex) {
    const std::size_t t = ex.tokens.size();
    const std::size_t a = ex.answer_positions.size();
    const std::set<std::size_t> s(ex.path_positions.begin(), ex.path_positions.end());
    double total = 0.0;
    for (std::size_t l = 0; l < ex.layers; ++l) {
        for (std::size_t h = 0; h < ex.heads; ++h) {
            for (std::size_t i = 0; i < a; ++i) {
                const float* row = ex.attention.data() + ((l * ex.heads + h) * a + i) * t;
                std::vector<double> alpha(t);
                if (ex.attention_normalized) {
                    for (std::size_t j = 0; j < t; ++j) alpha[j] = row[j];
                } else {
                    double z = 0.0;
                    for (std::size_t j = 0; j < t; ++j) {
                        alpha[j] = row[j] <= gga::trace::kMaskedScore ? 0.0 : std::exp(static_cast<double>(row[j]));
                        z += alpha[j];
                    }
                    for (auto& v : alpha) v /= z;
                }
                double on = 0.0;
                double off = 0.0;
                for (std::size_t j = 0; j < t; ++j) {
                    if (s.count(j)) {
                        on += alpha[j];
                    } else {
                        off += alpha[j];
                    }
                }
                total += on - off;
            }
        }
    }
    return total / static_cast<double>(ex.layers * ex.heads * a);
}

// Mean over answer tokens of clamp(max_i cos(h_t, g_i), 0, 1), all pairs.
inline double sas(const gga::trace::TraceExample& ex) {
    const std::size_t d = ex.dim;
    double total = 0.0;
    const std::size_t a = ex.answer_positions.size();
    for (std::size_t t = 0; t < a; ++t) {
        double best = -2.0;
        for (std::size_t i = 0; i < ex.triple_count; ++i) {
            double hg = 0.0;
            double hh = 0.0;
            double gg = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double h = ex.answer_hidden[t * d + k];
                const double g = ex.triple_embeddings[i * d + k];
                hg += h * g;
                hh += h * h;
                gg += g * g;
            }
            best = std::max(best, hg / (std::sqrt(hh) * std::sqrt(gg)));
        }
        total += std::clamp(best, 0.0, 1.0);
    }
    return total / static_cast<double>(a);
}

// Random multigraph over at most `max_nodes` entities.
inline gga::graph::Subgraph random_subgraph(gga::Rng& rng, std::size_t max_nodes, std::size_t max_triples) {
    const std::size_t nodes = 2 + rng.below(max_nodes - 1);
    const std::size_t count = 1 + rng.below(max_triples);
    const char* rels[] = {"r0", "r1", "r2"};
    gga::graph::Subgraph g;
    for (std::size_t i = 0; i < count; ++i) {
        const auto h = rng.below(nodes);
        const auto t = rng.below(nodes);
        g.triples.push_back({"e" + std::to_string(h), rels[rng.below(3)], "e" + std::to_string(t)});
    }
    // Entities may also come from outside the triples.
    const auto pick = [&] { return "e" + std::to_string(rng.below(nodes)); };
    const auto nq = 1 + rng.below(2);
    const auto na = 1 + rng.below(2);
    for (std::uint64_t i = 0; i < nq; ++i) g.question_entities.insert(pick());
    for (std::uint64_t i = 0; i < na; ++i) g.answer_entities.insert(pick());
    return g;
}

// Every simple undirected path (as triple indices) from each question entity
// to each distinct answer entity with at most max_depth edges; for each pair
// only the shortest ones are kept. Returns the union of their triples, or
// nullopt-equivalent empty set with `connected` false.
inline std::set<gga::graph::Triple> shortest_path_triples(const gga::graph::Subgraph& g, int max_depth, bool& connected) {
    std::vector<gga::graph::Triple> triples;
    {
        std::set<gga::graph::Triple> seen;
        for (const auto& t : g.triples) {
            if (seen.insert(t).second) triples.push_back(t);
        }
    }
    std::set<gga::graph::Triple> out;
    connected = false;
    for (const auto& q : g.question_entities) {
        for (const auto& a : g.answer_entities) {
            if (q == a) continue;
            std::vector<std::vector<std::size_t>> found;
            std::vector<std::size_t> path;
            std::set<std::string> visited{q};
            std::function<void(const std::string&)> dfs = [&](const std::string& at) {
                if (at == a) {
                    found.push_back(path);
                    return;
                }
                if (static_cast<int>(path.size()) == max_depth) return;
                for (std::size_t e = 0; e < triples.size(); ++e) {
                    const auto& t = triples[e];
                    std::string next;
                    if (t.head == at) {
                        next = t.tail;
                    } else if (t.tail == at) {
                        next = t.head;
                    } else {
                        continue;
                    }
                    if (visited.count(next)) continue;
                    visited.insert(next);
                    path.push_back(e);
                    dfs(next);
                    path.pop_back();
                    visited.erase(next);
                }
            };
            dfs(q);
            if (found.empty()) continue;
            connected = true;
            std::size_t best = std::numeric_limits<std::size_t>::max();
            for (const auto& p : found) best = std::min(best, p.size());
            for (const auto& p : found) {
                if (p.size() != best) continue;
                for (auto e : p) out.insert(triples[e]);
            }
        }
    }
    return out;
}

} // namespace oracle
