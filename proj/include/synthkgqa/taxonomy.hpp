#pragma once

// Answer-tree checks, canonical shape codes, hop counts, redundancy and
// generalization tags.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/sparql.hpp"
#include "synthkgqa/sparql_eval.hpp"

namespace synthkgqa {

struct AnswerTree {
  TripleSet edges;
  EntitySet seeds;
  EntityId answer;
};

enum class ViolationKind {
  Empty,
  AnswerNotInGraph,
  SeedNotInGraph,
  SelfAnswering,
  Disconnected,
  Cycle,
  HangingBranch,
  SeedNotLeaf,
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::Empty: return "empty";
    case ViolationKind::AnswerNotInGraph: return "answer_not_in_graph";
    case ViolationKind::SeedNotInGraph: return "seed_not_in_graph";
    case ViolationKind::SelfAnswering: return "self_answering";
    case ViolationKind::Disconnected: return "disconnected";
    case ViolationKind::Cycle: return "cycle";
    case ViolationKind::HangingBranch: return "hanging_branch";
    case ViolationKind::SeedNotLeaf: return "seed_not_leaf";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

namespace detail {

/// Undirected adjacency of a triple set; parallel edges and self-loops are
/// kept so cycle detection sees them.
inline std::map<EntityId, std::vector<EntityId>> undirected_adjacency(const TripleSet& edges) {
  std::map<EntityId, std::vector<EntityId>> adj;
  for (const Triple& t : edges) {
    adj[t.head].push_back(t.tail);
    adj[t.tail].push_back(t.head);
  }
  return adj;
}

struct UnionFind {
  std::map<EntityId, EntityId> parent;
  EntityId find(const EntityId& x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent.emplace(x, x);
      return x;
    }
    if (it->second == x) return x;
    EntityId root = find(it->second);
    parent[x] = root;
    return root;
  }
  bool unite(const EntityId& a, const EntityId& b) {
    EntityId ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
    return true;
  }
};

}  // namespace detail

/// Every violated answer-tree invariant; empty means the tree is valid.
inline std::vector<Violation> check_tree_constraints(const AnswerTree& tree) {
  std::vector<Violation> out;
  if (tree.edges.empty()) {
    out.push_back({ViolationKind::Empty, "answer subgraph has no triples"});
    return out;
  }
  const auto nodes = nodes_of(tree.edges);
  if (!nodes.count(tree.answer)) out.push_back({ViolationKind::AnswerNotInGraph, tree.answer.str()});
  for (const auto& s : tree.seeds)
    if (!nodes.count(s)) out.push_back({ViolationKind::SeedNotInGraph, s.str()});
  if (tree.seeds.count(tree.answer)) out.push_back({ViolationKind::SelfAnswering, tree.answer.str()});

  detail::UnionFind uf;
  std::string cycle_edges;
  for (const Triple& t : tree.edges) {
    if (!uf.unite(t.head, t.tail)) {
      if (!cycle_edges.empty()) cycle_edges += ", ";
      cycle_edges += t.head.str() + " " + t.relation.str() + " " + t.tail.str();
    }
  }
  std::set<EntityId> roots;
  for (const auto& n : nodes) roots.insert(uf.find(n));
  if (roots.size() > 1) out.push_back({ViolationKind::Disconnected, std::to_string(roots.size()) + " components"});
  if (!cycle_edges.empty()) out.push_back({ViolationKind::Cycle, cycle_edges});

  const auto adj = detail::undirected_adjacency(tree.edges);
  for (const auto& [n, nbrs] : adj) {
    const bool seed = tree.seeds.count(n) > 0;
    if (nbrs.size() == 1 && !seed && n != tree.answer) out.push_back({ViolationKind::HangingBranch, n.str()});
    if (seed && nbrs.size() != 1) out.push_back({ViolationKind::SeedNotLeaf, n.str()});
  }
  return out;
}

/// One branch hanging off a node: a path of `length` edges that ends in a
/// leaf (no children) or in a branching node with >= 2 children.
struct Shape {
  unsigned length = 1;
  std::vector<Shape> children;

  unsigned height() const {
    unsigned h = 0;
    for (const auto& c : children) h = std::max(h, c.height());
    return length + h;
  }
  unsigned leaves() const {
    if (children.empty()) return 1;
    unsigned n = 0;
    for (const auto& c : children) n += c.leaves();
    return n;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

inline std::string render(const Shape& s) {
  if (s.children.empty()) return "(" + std::to_string(s.length) + ")";
  std::string out = "(";
  if (s.length != 1) out += std::to_string(s.length);
  for (const auto& c : s.children) out += render(c);
  return out + ")";
}

inline bool canonical_before(const Shape& a, const Shape& b) {
  const bool ca = !a.children.empty(), cb = !b.children.empty();
  if (ca != cb) return ca;
  if (a.height() != b.height()) return a.height() > b.height();
  if (a.leaves() != b.leaves()) return a.leaves() > b.leaves();
  return render(a) > render(b);
}

inline void canonicalize(std::vector<Shape>& shapes) {
  for (auto& s : shapes) canonicalize(s.children);
  std::stable_sort(shapes.begin(), shapes.end(), canonical_before);
}

inline std::vector<Shape> branches(const std::map<EntityId, std::vector<EntityId>>& adj, const EntityId& node,
                                   const EntityId* parent) {
  std::vector<Shape> out;
  for (const auto& child : adj.at(node)) {
    if (parent && child == *parent) continue;
    Shape s;
    EntityId prev = node, cur = child;
    while (true) {
      std::vector<EntityId> next;
      for (const auto& n : adj.at(cur))
        if (n != prev) next.push_back(n);
      if (next.size() == 1) {
        prev = cur;
        cur = next.front();
        ++s.length;
        continue;
      }
      if (next.size() >= 2) s.children = branches(adj, cur, &prev);
      break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

inline std::string render_code(const std::vector<Shape>& root) {
  std::string out;
  for (const auto& s : root) out += detail::render(s);
  return out;
}

/// Parses a shape code such as "((1)(1))(2)" back into branches.
inline std::vector<Shape> parse_code(std::string_view code) {
  std::size_t pos = 0;
  auto fail = [&](const char* what) -> void { throw ParseError(std::string("bad isomorphism code: ") + what, 1, pos); };
  std::function<Shape()> branch = [&]() {
    if (pos >= code.size() || code[pos] != '(') fail("expected '('");
    ++pos;
    Shape s;
    std::size_t digits = 0;
    unsigned n = 0;
    while (pos < code.size() && code[pos] >= '0' && code[pos] <= '9') {
      n = n * 10 + static_cast<unsigned>(code[pos] - '0');
      ++pos;
      ++digits;
    }
    while (pos < code.size() && code[pos] == '(') s.children.push_back(branch());
    if (pos >= code.size() || code[pos] != ')') fail("expected ')'");
    ++pos;
    if (s.children.empty()) {
      if (digits == 0 || n == 0) fail("leaf branch needs a positive length");
      s.length = n;
    } else {
      if (s.children.size() < 2) fail("branching node needs two or more children");
      if (digits > 0 && n == 0) fail("zero length");
      s.length = digits ? n : 1;
    }
    return s;
  };
  std::vector<Shape> out;
  while (pos < code.size()) out.push_back(branch());
  if (out.empty()) fail("empty code");
  return out;
}

/// Longest root-to-leaf distance encoded by a code.
inline unsigned code_depth(const std::vector<Shape>& root) {
  unsigned h = 0;
  for (const auto& s : root) h = std::max(h, s.height());
  return h;
}

/// Canonical code of a valid answer tree rooted at its answer node.
inline std::string isomorphism_code(const AnswerTree& tree) {
  if (auto v = check_tree_constraints(tree); !v.empty())
    throw ConstraintError(std::string("not a valid answer tree: ") + to_string(v.front().kind) + " " + v.front().detail);
  const auto adj = detail::undirected_adjacency(tree.edges);
  auto root = detail::branches(adj, tree.answer, nullptr);
  detail::canonicalize(root);
  return render_code(root);
}

/// Maximum tree distance from a seed to the answer.
inline unsigned n_hops(const AnswerTree& tree) {
  const auto adj = detail::undirected_adjacency(tree.edges);
  if (!adj.count(tree.answer)) throw ConstraintError("answer not in tree");
  std::map<EntityId, unsigned> dist{{tree.answer, 0}};
  std::deque<EntityId> q{tree.answer};
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (const auto& v : adj.at(u))
      if (dist.emplace(v, dist[u] + 1).second) q.push_back(v);
  }
  unsigned best = 0;
  for (const auto& s : tree.seeds) {
    auto it = dist.find(s);
    if (it == dist.end()) throw ConstraintError("seed " + s.str() + " not connected to the answer");
    best = std::max(best, it->second);
  }
  return best;
}

/// Tree built from a code: answer "a", seeds "s1".., intermediates "i1"..,
/// all edges pointing towards the answer with relation "r".
inline AnswerTree tree_from_code(std::string_view code) {
  AnswerTree tree;
  tree.answer = EntityId("a");
  unsigned seeds = 0, inner = 0;
  std::function<void(const Shape&, const EntityId&)> grow = [&](const Shape& s, const EntityId& top) {
    EntityId cur = top;
    for (unsigned i = 0; i < s.length; ++i) {
      const bool last = i + 1 == s.length;
      EntityId next = last && s.children.empty() ? EntityId("s" + std::to_string(++seeds))
                                                 : EntityId("i" + std::to_string(++inner));
      tree.edges.insert(Triple{next, RelationId("r"), cur});
      if (last && s.children.empty()) tree.seeds.insert(next);
      cur = next;
    }
    for (const auto& c : s.children) grow(c, cur);
  };
  for (const auto& s : parse_code(code)) grow(s, tree.answer);
  return tree;
}

/// Union of the tree paths from each seed in `subset` to the answer.
inline TripleSet subtree_for_seeds(const AnswerTree& tree, const EntitySet& subset) {
  std::map<EntityId, std::vector<const Triple*>> inc;
  for (const Triple& t : tree.edges) {
    inc[t.head].push_back(&t);
    if (t.tail != t.head) inc[t.tail].push_back(&t);
  }
  std::map<EntityId, const Triple*> via;  // edge towards the answer
  std::set<EntityId> seen{tree.answer};
  std::deque<EntityId> q{tree.answer};
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (const Triple* t : inc[u]) {
      const EntityId& v = t->head == u ? t->tail : t->head;
      if (seen.insert(v).second) {
        via[v] = t;
        q.push_back(v);
      }
    }
  }
  TripleSet out;
  for (EntityId cur : subset) {
    if (!seen.count(cur)) throw ConstraintError("seed " + cur.str() + " not connected to the answer");
    while (cur != tree.answer) {
      const Triple* t = via.at(cur);
      out.insert(*t);
      cur = t->head == cur ? t->tail : t->head;
    }
  }
  return out;
}

/// Sorted ids joined with '-'.
inline std::string seed_set_key(const EntitySet& seeds) {
  std::string out;
  for (const auto& s : seeds) {
    if (!out.empty()) out += '-';
    out += s.str();
  }
  return out;
}

struct SubsetEvaluation {
  EntitySet seeds;
  EntitySet answers;
};

struct RedundancyReport {
  bool redundant = false;
  std::vector<EntitySet> minimal_seed_sets;
  std::map<std::string, std::string> minimal_queries;  // seed_set_key -> SPARQL text
  std::string minimal_isomorphism;                      // empty unless redundant
  std::vector<SubsetEvaluation> evaluated;              // every subset tried, in order
};

using SelectEvaluator = std::function<EntitySet(const sparql::QueryAst&)>;

/// Looks for the smallest proper seed subsets whose subtree query returns
/// exactly `answers`. Subsets are tried by increasing size, in
/// lexicographic order within a size; enumeration stops after the first
/// size with a hit.
inline RedundancyReport analyze_redundancy(const SelectEvaluator& eval, const AnswerTree& tree, const EntitySet& answers) {
  RedundancyReport report;
  const std::vector<EntityId> seeds(tree.seeds.begin(), tree.seeds.end());
  const std::size_t n = seeds.size();
  for (std::size_t size = 1; size < n && !report.redundant; ++size) {
    std::vector<std::size_t> pick(size);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      EntitySet subset;
      for (auto i : pick) subset.insert(seeds[i]);
      const TripleSet sub = subtree_for_seeds(tree, subset);
      const auto query = sparql::synthesize_query(sub, subset, tree.answer);
      auto got = eval(query);
      if (got == answers) {
        report.minimal_queries[seed_set_key(subset)] = sparql::serialize(query);
        if (!report.redundant) report.minimal_isomorphism = isomorphism_code(AnswerTree{sub, subset, tree.answer});
        report.redundant = true;
        report.minimal_seed_sets.push_back(subset);
      }
      report.evaluated.push_back({subset, std::move(got)});
      // Next combination.
      std::size_t i = size;
      while (i > 0 && pick[i - 1] == n - size + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < size; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  return report;
}

inline RedundancyReport analyze_redundancy(const KnowledgeGraph& kg, const AnswerTree& tree, const EntitySet& answers) {
  return analyze_redundancy([&](const sparql::QueryAst& q) { return sparql::eval_select(kg, q); }, tree, answers);
}

inline constexpr std::string_view kInDistribution = "in_distribution";
inline constexpr std::string_view kUnseenGraphType = "unseen_graph_type";
inline constexpr std::string_view kUnseenRelationType = "unseen_relation_type";

/// Generalization tags of a test question relative to training statistics.
inline std::set<std::string> tag_test_type(const std::string& code, const TripleSet& gt,
                                           const std::set<std::string>& train_iso_codes,
                                           const std::set<std::string>& train_relations) {
  std::set<std::string> tags;
  if (!train_iso_codes.count(code)) tags.insert(std::string(kUnseenGraphType));
  for (const auto& t : gt) {
    if (!train_relations.count(t.relation.str())) {
      tags.insert(std::string(kUnseenRelationType));
      break;
    }
  }
  if (tags.empty()) tags.insert(std::string(kInDistribution));
  return tags;
}

}  // namespace synthkgqa
