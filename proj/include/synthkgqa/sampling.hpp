#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"

namespace synthkgqa {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) built from the top 53 bits, so draws do not
/// depend on the standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Index drawn proportionally to `weights`; weights must be non-negative
/// with a positive sum.
inline std::size_t choose_weighted(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ArgumentError("weights must have a positive sum");
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

struct SamplerConfig {
  std::size_t node_limit = 30;
  std::size_t edge_limit = 60;
  std::uint64_t rng_seed = 0;
};

struct SeedSample {
  std::vector<EdgeIndex> edges;  // in insertion order
  std::vector<NodeIndex> nodes;  // visited set, in visiting order

  std::vector<Triple> triples(const KnowledgeGraph& kg) const {
    std::vector<Triple> out;
    out.reserve(edges.size());
    for (EdgeIndex e : edges) out.push_back(kg.triple(e));
    return out;
  }
};

namespace detail {

/// Softmax over inverse degrees. Degree-0 nodes get probability zero.
inline std::vector<double> inverse_degree_softmax(const KnowledgeGraph& kg,
                                                  std::span<const NodeIndex> nodes) {
  std::vector<double> logits(nodes.size(), -std::numeric_limits<double>::infinity());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::size_t d = kg.degree(nodes[i]);
    if (d == 0) continue;
    logits[i] = 1.0 / static_cast<double>(d);
    max_logit = std::max(max_logit, logits[i]);
  }
  std::vector<double> weights(nodes.size(), 0.0);
  if (max_logit == -std::numeric_limits<double>::infinity()) return weights;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (std::isfinite(logits[i])) weights[i] = std::exp(logits[i] - max_logit);
  return weights;
}

}  // namespace detail

/// Grows a connected seed subgraph around `start`: repeatedly picks a
/// visited node with probability softmax(1/degree), then one of its
/// unvisited neighbors the same way, and adds every triple between the new
/// node and the visited set. Stops at either limit, or once no visited node
/// has an unvisited neighbor.
inline SeedSample sample_seed_graph(const KnowledgeGraph& kg, NodeIndex start, const SamplerConfig& cfg) {
  if (cfg.node_limit < 1 || cfg.edge_limit < 1)
    throw ArgumentError("sampler limits must be positive");
  if (start >= kg.num_entities()) throw NotFoundError(std::to_string(start));

  Rng rng(cfg.rng_seed);
  SeedSample out;
  std::unordered_set<NodeIndex> visited{start};
  out.nodes.push_back(start);

  auto has_unseen_neighbor = [&](NodeIndex x) {
    bool found = false;
    kg.for_each_incident(x, [&](EdgeIndex, NodeIndex other) {
      if (!found && !visited.count(other)) found = true;
    });
    return found;
  };

  while (out.nodes.size() < cfg.node_limit && out.edges.size() < cfg.edge_limit) {
    auto expand_weights = detail::inverse_degree_softmax(kg, out.nodes);
    // Exhaustion guard: only nodes with positive probability can make progress.
    bool progress_possible = false;
    for (std::size_t i = 0; i < out.nodes.size() && !progress_possible; ++i)
      if (expand_weights[i] > 0.0 && has_unseen_neighbor(out.nodes[i])) progress_possible = true;
    if (!progress_possible) break;

    const NodeIndex z = out.nodes[choose_weighted(rng, expand_weights)];
    std::vector<NodeIndex> fresh;
    for (NodeIndex n : kg.neighbor_indexes(z))
      if (!visited.count(n)) fresh.push_back(n);
    if (fresh.empty()) continue;

    const auto pick_weights = detail::inverse_degree_softmax(kg, fresh);
    const NodeIndex n = fresh[choose_weighted(rng, pick_weights)];
    std::vector<EdgeIndex> added;
    kg.for_each_incident(n, [&](EdgeIndex e, NodeIndex other) {
      if (visited.count(other)) added.push_back(e);
    });
    std::sort(added.begin(), added.end());
    added.erase(std::unique(added.begin(), added.end()), added.end());
    out.edges.insert(out.edges.end(), added.begin(), added.end());
    visited.insert(n);
    out.nodes.push_back(n);
  }
  return out;
}

inline SeedSample sample_seed_graph(const KnowledgeGraph& kg, const EntityId& start, const SamplerConfig& cfg) {
  return sample_seed_graph(kg, kg.entity_index(start), cfg);
}

/// Undirected BFS distances from a set of sources; unreachable nodes are
/// left at `max()`. Stops expanding beyond `max_depth`.
inline std::vector<std::uint32_t> bfs_distances(const KnowledgeGraph& kg, std::span<const NodeIndex> sources,
                                                std::uint32_t max_depth = std::numeric_limits<std::uint32_t>::max()) {
  constexpr auto kInf = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> dist(kg.num_entities(), kInf);
  std::vector<NodeIndex> frontier;
  for (NodeIndex s : sources) {
    if (dist[s] != 0) {
      dist[s] = 0;
      frontier.push_back(s);
    }
  }
  std::uint32_t depth = 0;
  while (!frontier.empty() && depth < max_depth) {
    std::vector<NodeIndex> next;
    for (NodeIndex u : frontier) {
      kg.for_each_incident(u, [&](EdgeIndex, NodeIndex v) {
        if (dist[v] == kInf) {
          dist[v] = depth + 1;
          next.push_back(v);
        }
      });
    }
    frontier.swap(next);
    ++depth;
  }
  return dist;
}

/// Edges incident to some node within undirected distance k-1 of the
/// seeds, i.e. every edge lying on a path of at most k edges from a seed.
/// Result is sorted by edge index.
inline std::vector<EdgeIndex> khop_edges(const KnowledgeGraph& kg, std::span<const NodeIndex> seeds, std::uint32_t k) {
  if (k < 1) throw ArgumentError("hop count must be >= 1");
  std::unordered_set<NodeIndex> seen(seeds.begin(), seeds.end());
  std::vector<NodeIndex> frontier(seen.begin(), seen.end());
  std::sort(frontier.begin(), frontier.end());
  std::vector<EdgeIndex> out;
  for (std::uint32_t depth = 0; depth < k && !frontier.empty(); ++depth) {
    std::vector<NodeIndex> next;
    for (NodeIndex u : frontier) {
      kg.for_each_incident(u, [&](EdgeIndex e, NodeIndex v) {
        out.push_back(e);
        if (seen.insert(v).second) next.push_back(v);
      });
    }
    frontier.swap(next);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline TripleSet khop_neighborhood(const KnowledgeGraph& kg, const EntitySet& seeds, std::uint32_t k) {
  std::vector<NodeIndex> idx;
  for (const auto& s : seeds) idx.push_back(kg.entity_index(s));
  TripleSet out;
  for (EdgeIndex e : khop_edges(kg, idx, k)) out.insert(kg.triple(e));
  return out;
}

}  // namespace synthkgqa
