#pragma once

// Question-specific retrieval graphs, shortest-path statistics and
// supervision export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "synthkgqa/datapoint.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/sampling.hpp"
#include "synthkgqa/sparql.hpp"
#include "synthkgqa/sparql_eval.hpp"

namespace synthkgqa::analysis {

// ---- personalized PageRank ----

struct PprConfig {
  double damping = 0.85;
  double tolerance = 1e-8;  // L1 change between iterations
  unsigned max_iters = 100;
};

struct PprResult {
  std::vector<double> scores;
  unsigned iterations = 0;
  double last_change = 0.0;
};

/// Power iteration over an undirected multigraph on nodes 0..n-1. Each
/// edge contributes to both endpoints' degrees; a self-loop counts twice.
/// Mass of isolated nodes returns through the teleport vector, which is
/// uniform over `seeds`.
inline PprResult ppr_local(std::size_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                           std::span<const std::uint32_t> seeds, const PprConfig& cfg = {}) {
  if (seeds.empty()) throw ArgumentError("personalized PageRank needs at least one seed");
  if (!(cfg.damping > 0.0 && cfg.damping < 1.0)) throw ArgumentError("damping must lie in (0, 1)");
  std::vector<double> tele(n, 0.0);
  const std::set<std::uint32_t> seed_set(seeds.begin(), seeds.end());
  for (auto s : seed_set) {
    if (s >= n) throw ArgumentError("seed outside the graph");
    tele[s] = 1.0 / static_cast<double>(seed_set.size());
  }
  // CSR adjacency with multiplicity.
  std::vector<std::uint32_t> offsets(n + 1, 0);
  for (auto [u, v] : edges) {
    ++offsets[u + 1];
    ++offsets[v + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<std::uint32_t> adj(offsets.back());
  {
    std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
    for (auto [u, v] : edges) {
      adj[fill[u]++] = v;
      adj[fill[v]++] = u;
    }
  }
  PprResult res;
  std::vector<double> x = tele, y(n);
  for (res.iterations = 0; res.iterations < cfg.max_iters;) {
    std::fill(y.begin(), y.end(), 0.0);
    double dangling = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      const auto deg = offsets[u + 1] - offsets[u];
      if (deg == 0) {
        dangling += x[u];
        continue;
      }
      const double share = cfg.damping * x[u] / static_cast<double>(deg);
      for (auto k = offsets[u]; k < offsets[u + 1]; ++k) y[adj[k]] += share;
    }
    const double restart = (1.0 - cfg.damping) + cfg.damping * dangling;
    double change = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      y[u] += restart * tele[u];
      change += std::abs(y[u] - x[u]);
    }
    x.swap(y);
    ++res.iterations;
    res.last_change = change;
    if (change < cfg.tolerance) break;
  }
  res.scores = std::move(x);
  return res;
}

/// PPR over an explicit node list and triple list; nodes absent from every
/// triple are kept (and isolated).
inline std::map<EntityId, double> personalized_pagerank(const std::vector<EntityId>& nodes, const std::vector<Triple>& triples,
                                                        const EntitySet& seeds, const PprConfig& cfg = {}) {
  std::map<EntityId, std::uint32_t> idx;
  for (const auto& n : nodes) idx.emplace(n, static_cast<std::uint32_t>(idx.size()));
  for (const auto& t : triples) {
    idx.emplace(t.head, static_cast<std::uint32_t>(idx.size()));
    idx.emplace(t.tail, static_cast<std::uint32_t>(idx.size()));
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& t : triples) edges.emplace_back(idx.at(t.head), idx.at(t.tail));
  std::vector<std::uint32_t> s;
  for (const auto& seed : seeds) {
    auto it = idx.find(seed);
    if (it == idx.end()) throw ArgumentError("seed " + seed.str() + " is not a node of the graph");
    s.push_back(it->second);
  }
  const auto res = ppr_local(idx.size(), edges, s, cfg);
  std::map<EntityId, double> out;
  for (const auto& [id, i] : idx) out[id] = res.scores[i];
  return out;
}

// ---- paths in answer trees ----

struct PathStep {
  Triple triple;
  bool forward = true;  // traversed head -> tail

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

/// Path from `seed` to the tree's answer, in traversal order.
inline std::vector<PathStep> tree_path(const AnswerTree& tree, const EntityId& seed) {
  std::map<EntityId, std::vector<const Triple*>> inc;
  for (const Triple& t : tree.edges) {
    inc[t.head].push_back(&t);
    if (t.tail != t.head) inc[t.tail].push_back(&t);
  }
  std::map<EntityId, const Triple*> via;
  std::set<EntityId> seen{seed};
  std::deque<EntityId> q{seed};
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    if (u == tree.answer) break;
    for (const Triple* t : inc[u]) {
      const EntityId& v = t->head == u ? t->tail : t->head;
      if (seen.insert(v).second) {
        via[v] = t;
        q.push_back(v);
      }
    }
  }
  if (!seen.count(tree.answer)) throw ConstraintError("seed " + seed.str() + " not connected to the answer");
  std::vector<PathStep> rev;
  for (EntityId cur = tree.answer; cur != seed;) {
    const Triple* t = via.at(cur);
    const EntityId prev = t->head == cur ? t->tail : t->head;
    rev.push_back({*t, t->head == prev});
    cur = prev;
  }
  return {rev.rbegin(), rev.rend()};
}

// ---- metapaths ----

struct MetapathStep {
  RelationId relation;
  bool forward = true;

  friend bool operator==(const MetapathStep&, const MetapathStep&) = default;
};

inline std::vector<MetapathStep> metapath_of(const std::vector<PathStep>& path) {
  std::vector<MetapathStep> out;
  for (const auto& s : path) out.push_back({s.triple.relation, s.forward});
  return out;
}

struct MetapathInstances {
  TripleSet triples;
  bool truncated = false;
};

/// Edges on walks from `seed` that follow the relation/direction sequence.
/// Each level keeps at most `cap` edges; hitting the cap sets `truncated`.
inline MetapathInstances enumerate_metapath_instances(const KnowledgeGraph& kg, const EntityId& seed,
                                                      const std::vector<MetapathStep>& metapath, std::size_t cap = 512) {
  MetapathInstances out;
  auto start = kg.find_entity(seed.str());
  if (!start || metapath.empty()) return out;
  struct LevelEdge {
    EdgeIndex edge;
    NodeIndex near, far;
  };
  std::vector<std::vector<LevelEdge>> levels;
  std::vector<NodeIndex> frontier{*start};
  for (const auto& step : metapath) {
    std::vector<LevelEdge> level;
    auto rel = kg.find_relation(step.relation.str());
    if (rel) {
      for (NodeIndex u : frontier) {
        if (level.size() >= cap) break;
        if (step.forward) {
          const auto out_edges = kg.out_edges(u);
          for (std::size_t k = 0; k < out_edges.size() && level.size() < cap; ++k) {
            if (out_edges[k].relation == *rel)
              level.push_back({static_cast<EdgeIndex>(kg.out_begin(u) + k), u, out_edges[k].tail});
          }
          if (level.size() >= cap) out.truncated = true;
        } else {
          for (EdgeIndex e : kg.in_edges(u)) {
            if (level.size() >= cap) {
              out.truncated = true;
              break;
            }
            if (kg.edge(e).relation == *rel) level.push_back({e, u, kg.edge(e).head});
          }
        }
      }
    }
    std::set<NodeIndex> next;
    for (const auto& le : level) next.insert(le.far);
    frontier.assign(next.begin(), next.end());
    levels.push_back(std::move(level));
    if (frontier.empty()) return out;
  }
  // Keep only edges that continue to the end of the metapath.
  std::set<NodeIndex> alive(frontier.begin(), frontier.end());
  for (std::size_t i = levels.size(); i-- > 0;) {
    std::set<NodeIndex> prev;
    for (const auto& le : levels[i]) {
      if (!alive.count(le.far)) continue;
      out.triples.insert(kg.triple(le.edge));
      prev.insert(le.near);
    }
    alive.swap(prev);
  }
  return out;
}

// ---- shortest paths ----

struct ShortestPaths {
  std::optional<unsigned> length;            // nullopt when unreachable
  std::vector<std::vector<PathStep>> paths;  // up to the enumeration cap
  double path_count = 0.0;                   // exact count (may exceed the cap)
  bool truncated = false;
  TripleSet triples;  // every triple lying on some shortest path
};

namespace detail {

constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max();

// Arcs usable from u: (edge, neighbour, forward).
template <class F>
void for_each_arc(const KnowledgeGraph& kg, NodeIndex u, bool directed, bool reverse, F&& f) {
  if (!directed || !reverse) {
    const auto out = kg.out_edges(u);
    for (std::size_t k = 0; k < out.size(); ++k) f(static_cast<EdgeIndex>(kg.out_begin(u) + k), out[k].tail, true);
  }
  if (!directed || reverse)
    for (EdgeIndex e : kg.in_edges(u)) f(e, kg.edge(e).head, false);
}

inline std::unordered_map<NodeIndex, std::uint32_t> bfs(const KnowledgeGraph& kg, NodeIndex src, bool directed,
                                                        bool reverse, std::uint32_t limit,
                                                        std::optional<NodeIndex> stop_at = std::nullopt) {
  std::unordered_map<NodeIndex, std::uint32_t> dist{{src, 0}};
  std::vector<NodeIndex> frontier{src};
  for (std::uint32_t d = 0; !frontier.empty() && d < limit; ++d) {
    if (stop_at && dist.count(*stop_at)) break;
    std::vector<NodeIndex> next;
    for (NodeIndex u : frontier)
      for_each_arc(kg, u, directed, reverse, [&](EdgeIndex, NodeIndex v, bool) {
        if (dist.emplace(v, d + 1).second) next.push_back(v);
      });
    frontier.swap(next);
  }
  return dist;
}

}  // namespace detail

/// All minimal-length paths between two entities. Undirected by default;
/// with `directed` only head -> tail traversal is allowed.
inline ShortestPaths all_shortest_paths(const KnowledgeGraph& kg, const EntityId& source, const EntityId& target,
                                        bool directed = false, std::size_t max_paths = 10000) {
  const NodeIndex s = kg.entity_index(source), t = kg.entity_index(target);
  ShortestPaths out;
  const auto ds = detail::bfs(kg, s, directed, false, detail::kInf, t);
  auto it = ds.find(t);
  if (it == ds.end()) return out;
  const std::uint32_t d = it->second;
  out.length = d;
  if (d == 0) {
    out.paths.push_back({});
    out.path_count = 1.0;
    return out;
  }
  const auto dt = detail::bfs(kg, t, directed, true, d);
  auto dist = [](const std::unordered_map<NodeIndex, std::uint32_t>& m, NodeIndex n) {
    auto i = m.find(n);
    return i == m.end() ? detail::kInf : i->second;
  };
  // Shortest-path DAG: arc u->v lies on a shortest path iff ds(u)+1+dt(v) = d.
  struct Arc {
    EdgeIndex edge;
    NodeIndex to;
    bool forward;
  };
  std::unordered_map<NodeIndex, std::vector<Arc>> dag;
  std::vector<NodeIndex> layer{s};
  for (std::uint32_t level = 0; level < d; ++level) {
    std::set<NodeIndex> next;
    for (NodeIndex u : layer) {
      auto& arcs = dag[u];
      detail::for_each_arc(kg, u, directed, false, [&](EdgeIndex e, NodeIndex v, bool fwd) {
        if (dist(dt, v) != detail::kInf && level + 1 + dist(dt, v) == d && dist(ds, v) == level + 1) {
          arcs.push_back({e, v, fwd});
          next.insert(v);
        }
      });
      std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
        return std::tie(a.edge, a.forward) < std::tie(b.edge, b.forward);
      });
    }
    layer.assign(next.begin(), next.end());
  }
  for (const auto& [u, arcs] : dag)
    for (const auto& a : arcs) out.triples.insert(kg.triple(a.edge));

  // Path counts by DP from the target backwards.
  std::unordered_map<NodeIndex, double> count{{t, 1.0}};
  std::function<double(NodeIndex)> paths_from = [&](NodeIndex u) -> double {
    if (auto c = count.find(u); c != count.end()) return c->second;
    double total = 0.0;
    if (auto a = dag.find(u); a != dag.end())
      for (const auto& arc : a->second) total += paths_from(arc.to);
    count[u] = total;
    return total;
  };
  out.path_count = paths_from(s);

  std::vector<PathStep> cur;
  std::function<void(NodeIndex)> walk = [&](NodeIndex u) {
    if (out.paths.size() >= max_paths) {
      out.truncated = true;
      return;
    }
    if (u == t) {
      out.paths.push_back(cur);
      return;
    }
    auto a = dag.find(u);
    if (a == dag.end()) return;
    for (const auto& arc : a->second) {
      cur.push_back({kg.triple(arc.edge), arc.forward});
      walk(arc.to);
      cur.pop_back();
      if (out.truncated) return;
    }
  };
  walk(s);
  if (out.path_count > static_cast<double>(out.paths.size())) out.truncated = true;
  return out;
}

struct SeedPathStats {
  EntityId seed;
  unsigned gt_path_length = 0;
  std::optional<unsigned> sp_length;
  bool shortcut = false;
  double parallel_path_count = 0.0;
};

struct OverlapStats {
  std::string question_id;
  std::vector<SeedPathStats> seeds;
  double pct_gt_in_sp = 0.0;
  double pct_sp_in_gt = 0.0;
  std::size_t n_gt_triples = 0;
  std::size_t n_sp_triples = 0;
};

/// Answers on `kg_name`, or the answer node when the record has none.
inline EntitySet answers_for(const Datapoint& dp, const std::string& kg_name) {
  auto a = dp.answers(kg_name);
  if (a.empty()) a.insert(dp.answer_node.id);
  return a;
}

/// Overlap between ground-truth triples and shortest-path triples. The SP
/// set is the union over (seed, answer) pairs; per-seed statistics use the
/// answer node. Pairs with an id missing from `kg` contribute nothing.
inline OverlapStats sp_gt_overlap(const KnowledgeGraph& kg, const Datapoint& dp, const std::string& kg_name = "wikikg2",
                                  bool directed = false) {
  OverlapStats st;
  st.question_id = dp.id;
  const AnswerTree tree = dp.tree();
  const TripleSet gt = tree.edges;
  TripleSet sp;
  const auto answers = answers_for(dp, kg_name);
  for (const auto& seed : tree.seeds) {
    SeedPathStats ps;
    ps.seed = seed;
    ps.gt_path_length = static_cast<unsigned>(tree_path(tree, seed).size());
    if (!kg.has_entity(seed)) {
      st.seeds.push_back(ps);
      continue;
    }
    for (const auto& a : answers) {
      if (!kg.has_entity(a)) continue;
      auto res = all_shortest_paths(kg, seed, a, directed, 0);
      sp.insert(res.triples.begin(), res.triples.end());
      if (a == dp.answer_node.id) {
        ps.sp_length = res.length;
        ps.parallel_path_count = res.path_count;
        ps.shortcut = res.length && *res.length < ps.gt_path_length;
      }
    }
    st.seeds.push_back(ps);
  }
  std::size_t both = 0;
  for (const auto& t : gt) both += sp.count(t);
  st.n_gt_triples = gt.size();
  st.n_sp_triples = sp.size();
  st.pct_gt_in_sp = gt.empty() ? 0.0 : 100.0 * static_cast<double>(both) / static_cast<double>(gt.size());
  st.pct_sp_in_gt = sp.empty() ? 0.0 : 100.0 * static_cast<double>(both) / static_cast<double>(sp.size());
  return st;
}

// ---- supervision export ----

enum class SupervisionMode { GroundTruth, ShortestPath };

struct SupervisionPath {
  EntityId seed;
  EntityId answer;
  std::vector<PathStep> steps;
};

struct Supervision {
  std::string question_id;
  SupervisionMode mode = SupervisionMode::GroundTruth;
  std::vector<SupervisionPath> paths;
  TripleSet triples;
  bool truncated = false;
};

/// Relation path with inverse traversal written as "^P".
inline std::vector<std::string> relation_path(const std::vector<PathStep>& steps) {
  std::vector<std::string> out;
  for (const auto& s : steps) out.push_back((s.forward ? "" : "^") + s.triple.relation.str());
  return out;
}

/// Training targets for a question: the tree path of each seed (GT) or
/// every minimal path from each seed to each answer (SP). Paths are ordered
/// by seed, answer, then discovery order.
inline Supervision export_supervision(const Datapoint& dp, const KnowledgeGraph& kg, SupervisionMode mode,
                                      const std::string& kg_name = "wikikg2", bool directed = false,
                                      std::size_t max_paths = 10000) {
  Supervision out;
  out.question_id = dp.id;
  out.mode = mode;
  const AnswerTree tree = dp.tree();
  if (mode == SupervisionMode::GroundTruth) {
    for (const auto& seed : tree.seeds) out.paths.push_back({seed, tree.answer, tree_path(tree, seed)});
    out.triples = tree.edges;
    return out;
  }
  const auto answers = answers_for(dp, kg_name);
  for (const auto& seed : tree.seeds) {
    if (!kg.has_entity(seed)) continue;
    for (const auto& a : answers) {
      if (!kg.has_entity(a)) continue;
      auto res = all_shortest_paths(kg, seed, a, directed, max_paths);
      out.truncated = out.truncated || res.truncated;
      for (auto& p : res.paths) out.paths.push_back({seed, a, std::move(p)});
      out.triples.insert(res.triples.begin(), res.triples.end());
    }
  }
  return out;
}

// ---- retrieval graphs ----

struct RetrievalGraphConfig {
  unsigned hop_depth = 3;
  std::size_t top_nodes = 2500;
  std::size_t edge_cap = 30000;
  PprConfig ppr;
  std::size_t metapath_cap = 512;
  bool add_confounders = true;
  std::string kg_name = "wikikg2";
};

enum class EdgeOrigin { PrunedKept, ReaddedGt, Confounder };

inline const char* to_string(EdgeOrigin o) {
  switch (o) {
    case EdgeOrigin::PrunedKept: return "pruned_kept";
    case EdgeOrigin::ReaddedGt: return "readded_gt";
    case EdgeOrigin::Confounder: return "confounder";
  }
  return "unknown";
}

struct RetrievalEdge {
  Triple triple;
  EdgeOrigin origin;
};

struct RetrievalGraph {
  std::string question_id;
  std::vector<RetrievalEdge> edges;
  std::size_t neighborhood_edges = 0;
  std::size_t neighborhood_nodes = 0;
  unsigned hop_depth = 0;
  bool confounders_truncated = false;

  TripleSet triples() const {
    TripleSet out;
    for (const auto& e : edges) out.insert(e.triple);
    return out;
  }
};

/// Full answer subgraph on `kg_name`, computed from the query when the
/// record does not carry it.
inline TripleSet full_answer_subgraph(const KnowledgeGraph& kg, const Datapoint& dp, const std::string& kg_name) {
  if (dp.find_kg(kg_name)) return dp.full_subgraph(kg_name);
  return sparql::eval_construct(kg, sparql::to_construct(sparql::parse_query(dp.sparql_query)));
}

/// Neighbourhood of the seeds, pruned to the top PPR nodes and the edge
/// cap, then completed with the full answer subgraph and metapath
/// confounders.
inline RetrievalGraph build_retrieval_graph(const KnowledgeGraph& kg, const Datapoint& dp,
                                            const RetrievalGraphConfig& cfg = {}) {
  if (cfg.top_nodes == 0 || cfg.edge_cap == 0) throw ArgumentError("retrieval graph caps must be positive");
  RetrievalGraph out;
  out.question_id = dp.id;
  out.hop_depth = std::max(cfg.hop_depth, dp.n_hops);
  std::vector<NodeIndex> seeds;
  for (const auto& s : dp.seed_entities) {
    auto idx = kg.find_entity(s.id.str());
    if (!idx) throw ArgumentError("seed " + s.id.str() + " is not in the graph");
    seeds.push_back(*idx);
  }
  if (seeds.empty()) throw ArgumentError("question " + dp.id + " has no seeds");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  const auto hood = khop_edges(kg, seeds, out.hop_depth);
  out.neighborhood_edges = hood.size();
  // Local numbering: seeds first, then endpoints in edge order.
  std::unordered_map<NodeIndex, std::uint32_t> local;
  std::vector<NodeIndex> global;
  auto intern = [&](NodeIndex n) {
    auto [it, inserted] = local.emplace(n, static_cast<std::uint32_t>(global.size()));
    if (inserted) global.push_back(n);
    return it->second;
  };
  std::vector<std::uint32_t> local_seeds;
  for (NodeIndex s : seeds) local_seeds.push_back(intern(s));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> local_edges;
  local_edges.reserve(hood.size());
  for (EdgeIndex e : hood) {
    const Edge& x = kg.edge(e);
    local_edges.emplace_back(intern(x.head), intern(x.tail));
  }
  out.neighborhood_nodes = global.size();
  const auto scores = ppr_local(global.size(), local_edges, local_seeds, cfg.ppr).scores;

  std::vector<std::uint32_t> order(global.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return kg.entity_id(global[a]) < kg.entity_id(global[b]);
  });
  std::vector<char> top(global.size(), 0);
  for (std::size_t i = 0; i < order.size() && i < cfg.top_nodes; ++i) top[order[i]] = 1;

  struct Ranked {
    double score;
    Triple triple;
  };
  std::vector<Ranked> kept;
  for (std::size_t i = 0; i < hood.size(); ++i) {
    auto [u, v] = local_edges[i];
    if (top[u] && top[v]) kept.push_back({scores[u] + scores[v], kg.triple(hood[i])});
  }
  std::sort(kept.begin(), kept.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.triple < b.triple;
  });
  if (kept.size() > cfg.edge_cap) kept.resize(cfg.edge_cap);

  TripleSet present;
  for (const auto& r : kept) {
    out.edges.push_back({r.triple, EdgeOrigin::PrunedKept});
    present.insert(r.triple);
  }
  for (const auto& t : full_answer_subgraph(kg, dp, cfg.kg_name))
    if (present.insert(t).second) out.edges.push_back({t, EdgeOrigin::ReaddedGt});

  if (cfg.add_confounders) {
    const AnswerTree tree = dp.tree();
    for (const auto& seed : tree.seeds) {
      const auto mp = metapath_of(tree_path(tree, seed));
      auto inst = enumerate_metapath_instances(kg, seed, mp, cfg.metapath_cap);
      out.confounders_truncated = out.confounders_truncated || inst.truncated;
      for (const auto& t : inst.triples)
        if (present.insert(t).second) out.edges.push_back({t, EdgeOrigin::Confounder});
    }
  }
  return out;
}

}  // namespace synthkgqa::analysis
