#pragma once

// Local evaluation of the conjunctive fragment against a KnowledgeGraph,
// and query synthesis from answer trees.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/sparql.hpp"

namespace synthkgqa::sparql {

/// Variable name -> bound id (entity or relation id string).
using Binding = std::map<std::string, std::string>;

namespace detail {

constexpr std::uint32_t kUnbound = std::numeric_limits<std::uint32_t>::max();

struct Slot {
  bool variable = false;
  std::uint32_t value = 0;  // constant index, or variable slot
};

struct CompiledPattern {
  Slot s, p, o;
};

/// Backtracking BGP matcher over interned indices. Patterns are picked
/// dynamically: fewest unbound variables first, then the smallest
/// candidate edge list.
class Matcher {
 public:
  Matcher(const KnowledgeGraph& kg, const std::vector<TriplePattern>& where) : kg_(kg) {
    for (const auto& tp : where) {
      CompiledPattern cp;
      if (!compile_node(tp.subject, cp.s) || !compile_relation(tp.predicate, cp.p) || !compile_node(tp.object, cp.o)) {
        unsatisfiable_ = true;
        return;
      }
      patterns_.push_back(cp);
    }
  }

  const std::vector<std::string>& variables() const { return var_names_; }
  std::optional<std::size_t> slot_of(const std::string& name) const {
    auto it = var_slot_.find(name);
    if (it == var_slot_.end()) return std::nullopt;
    return it->second;
  }
  bool is_relation_var(std::size_t slot) const { return relation_var_[slot]; }
  bool unsatisfiable() const { return unsatisfiable_; }

  /// Calls f(values) for every solution; values[slot] is a NodeIndex or a
  /// RelIndex depending on the variable's role.
  void solve(const std::function<void(const std::vector<std::uint32_t>&)>& f) {
    if (unsatisfiable_) return;
    values_.assign(var_names_.size(), kUnbound);
    done_.assign(patterns_.size(), 0);
    recurse(0, f);
  }

 private:
  bool compile_node(const Term& t, Slot& slot) {
    if (t.is_variable()) {
      slot = {true, var(t.value, false)};
      return true;
    }
    auto idx = kg_.find_entity(t.value);
    if (!idx) return false;
    slot = {false, *idx};
    return true;
  }

  bool compile_relation(const Term& t, Slot& slot) {
    if (t.is_variable()) {
      slot = {true, var(t.value, true)};
      return true;
    }
    auto idx = kg_.find_relation(t.value);
    if (!idx) return false;
    slot = {false, *idx};
    return true;
  }

  std::uint32_t var(const std::string& name, bool relation) {
    auto [it, inserted] = var_slot_.emplace(name, static_cast<std::uint32_t>(var_names_.size()));
    if (inserted) {
      var_names_.push_back(name);
      relation_var_.push_back(relation);
    } else if (relation_var_[it->second] != relation) {
      throw UnsupportedFeature("variable ?" + name + " used as node and predicate", 0, 0);
    }
    return it->second;
  }

  std::uint32_t get(const Slot& s) const { return s.variable ? values_[s.value] : s.value; }

  std::size_t unbound_count(const CompiledPattern& cp) const {
    std::size_t n = 0;
    for (const Slot* s : {&cp.s, &cp.p, &cp.o})
      if (s->variable && values_[s->value] == kUnbound) ++n;
    return n;
  }

  // Candidate edges for a pattern under the current bindings, narrowest
  // index first.
  std::span<const Edge> out_range(NodeIndex h, std::uint32_t r) const {
    auto out = kg_.out_edges(h);
    if (r == kUnbound) return out;
    auto lo = std::lower_bound(out.begin(), out.end(), r, [](const Edge& e, std::uint32_t rel) { return e.relation < rel; });
    auto hi = std::upper_bound(lo, out.end(), r, [](std::uint32_t rel, const Edge& e) { return rel < e.relation; });
    return {lo, hi};
  }

  std::size_t candidate_count(const CompiledPattern& cp) const {
    const auto s = get(cp.s), p = get(cp.p), o = get(cp.o);
    if (s != kUnbound) return out_range(s, p).size();
    if (o != kUnbound) return kg_.in_edges(o).size();
    if (p != kUnbound) return kg_.relation_edges(p).size();
    return kg_.num_triples();
  }

  template <class F>
  void for_each_candidate(const CompiledPattern& cp, F&& f) const {
    const auto s = get(cp.s), p = get(cp.p), o = get(cp.o);
    if (s != kUnbound) {
      for (const Edge& e : out_range(s, p)) f(e);
    } else if (o != kUnbound) {
      for (EdgeIndex e : kg_.in_edges(o)) f(kg_.edge(e));
    } else if (p != kUnbound) {
      for (EdgeIndex e : kg_.relation_edges(p)) f(kg_.edge(e));
    } else {
      for (const Edge& e : kg_.edges()) f(e);
    }
  }

  // Binds `slot` to `value`; returns false on conflict. Records newly bound
  // slots in `bound` so the caller can undo them.
  bool bind(const Slot& slot, std::uint32_t value, std::vector<std::uint32_t>& bound) {
    if (!slot.variable) return slot.value == value;
    auto& cur = values_[slot.value];
    if (cur == kUnbound) {
      cur = value;
      bound.push_back(slot.value);
      return true;
    }
    return cur == value;
  }

  void recurse(std::size_t depth, const std::function<void(const std::vector<std::uint32_t>&)>& f) {
    if (depth == patterns_.size()) {
      f(values_);
      return;
    }
    std::size_t best = patterns_.size();
    std::size_t best_unbound = 4, best_count = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < patterns_.size(); ++i) {
      if (done_[i]) continue;
      const std::size_t u = unbound_count(patterns_[i]);
      if (u > best_unbound) continue;
      const std::size_t c = candidate_count(patterns_[i]);
      if (u < best_unbound || c < best_count) {
        best = i;
        best_unbound = u;
        best_count = c;
      }
    }
    if (best_count == 0) return;
    done_[best] = 1;
    const CompiledPattern cp = patterns_[best];
    std::vector<std::uint32_t> bound;
    for_each_candidate(cp, [&](const Edge& e) {
      bound.clear();
      if (bind(cp.s, e.head, bound) && bind(cp.p, e.relation, bound) && bind(cp.o, e.tail, bound))
        recurse(depth + 1, f);
      for (auto slot : bound) values_[slot] = kUnbound;
    });
    done_[best] = 0;
  }

  const KnowledgeGraph& kg_;
  std::vector<CompiledPattern> patterns_;
  std::vector<std::string> var_names_;
  std::vector<bool> relation_var_;
  std::map<std::string, std::uint32_t> var_slot_;
  std::vector<std::uint32_t> values_;
  std::vector<char> done_;
  bool unsatisfiable_ = false;
};

inline std::set<std::string> variables_in(const std::vector<TriplePattern>& patterns) {
  auto v = variables_of(patterns);
  return {v.begin(), v.end()};
}

}  // namespace detail

/// All distinct solutions of the WHERE pattern, projected to every
/// variable it mentions.
inline std::vector<Binding> eval_bindings(const KnowledgeGraph& kg, const QueryAst& ast) {
  detail::Matcher m(kg, ast.where);
  std::set<Binding> rows;
  m.solve([&](const std::vector<std::uint32_t>& values) {
    Binding b;
    for (std::size_t i = 0; i < values.size(); ++i)
      b[m.variables()[i]] = m.is_relation_var(i) ? kg.relation_id(values[i]) : kg.entity_id(values[i]);
    rows.insert(std::move(b));
  });
  return {rows.begin(), rows.end()};
}

/// Distinct bindings of the projected entity variable. With more than one
/// projected variable, `variable` selects which one.
inline EntitySet eval_select(const KnowledgeGraph& kg, const QueryAst& ast, std::string variable = {}) {
  if (ast.form != QueryForm::Select) throw QueryError("eval_select needs a SELECT query");
  if (variable.empty()) {
    if (ast.projection.size() != 1) throw QueryError("ambiguous projection; name the variable to return");
    variable = ast.projection.front();
  }
  const auto where_vars = detail::variables_in(ast.where);
  for (const auto& v : ast.projection)
    if (!where_vars.count(v)) throw QueryError("projected variable ?" + v + " does not occur in WHERE");
  if (!where_vars.count(variable)) throw QueryError("variable ?" + variable + " does not occur in WHERE");

  detail::Matcher m(kg, ast.where);
  EntitySet out;
  const auto slot = m.slot_of(variable);
  if (!slot) return out;  // pattern compiled away: a constant is absent from the graph
  if (m.is_relation_var(*slot)) throw QueryError("variable ?" + variable + " binds predicates, not entities");
  std::set<NodeIndex> nodes;
  m.solve([&](const std::vector<std::uint32_t>& values) { nodes.insert(values[*slot]); });
  for (NodeIndex n : nodes) out.insert(EntityId(kg.entity_id(n)));
  return out;
}

/// Union over all solutions of the instantiated template.
inline TripleSet eval_construct(const KnowledgeGraph& kg, const QueryAst& ast) {
  if (ast.form != QueryForm::Construct) throw QueryError("eval_construct needs a CONSTRUCT query");
  detail::Matcher m(kg, ast.where);
  if (m.unsatisfiable()) return {};
  std::set<std::array<std::uint32_t, 3>> edges;
  struct TemplateSlot {
    bool variable;
    std::uint32_t value;
  };
  std::vector<std::array<TemplateSlot, 3>> tmpl;
  for (const auto& tp : ast.construct_template) {
    std::array<TemplateSlot, 3> ts{};
    const Term* terms[3] = {&tp.subject, &tp.predicate, &tp.object};
    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) {
      if (terms[i]->is_variable()) {
        auto slot = m.slot_of(terms[i]->value);
        if (!slot) throw QueryError("template variable ?" + terms[i]->value + " does not occur in WHERE");
        ts[i] = {true, static_cast<std::uint32_t>(*slot)};
      } else {
        auto idx = i == 1 ? kg.find_relation(terms[i]->value) : kg.find_entity(terms[i]->value);
        if (!idx) ok = false;
        else ts[i] = {false, *idx};
      }
    }
    if (!ok) return {};  // the same constant appears in WHERE, so no solutions exist
    tmpl.push_back(ts);
  }
  m.solve([&](const std::vector<std::uint32_t>& values) {
    for (const auto& ts : tmpl) {
      std::array<std::uint32_t, 3> e{};
      for (int i = 0; i < 3; ++i) e[i] = ts[i].variable ? values[ts[i].value] : ts[i].value;
      edges.insert(e);
    }
  });
  TripleSet out;
  for (const auto& e : edges)
    out.insert(Triple{EntityId(kg.entity_id(e[0])), RelationId(kg.relation_id(e[1])), EntityId(kg.entity_id(e[2]))});
  return out;
}

/// SELECT ?answer query for an answer tree: the answer becomes ?answer,
/// seeds and relations stay constants, other nodes become ?v1, ?v2, ...
/// Patterns and names follow a BFS from the answer visiting incident edges
/// ordered by (relation, neighbour id, outgoing before incoming).
inline QueryAst synthesize_query(const TripleSet& g, const EntitySet& seeds, const EntityId& answer) {
  const auto nodes = nodes_of(g);
  if (!nodes.count(answer)) throw ArgumentError("answer " + answer.str() + " is not a node of the subgraph");
  if (seeds.count(answer)) throw ArgumentError("answer " + answer.str() + " is also a seed");

  struct Incident {
    RelationId relation;
    EntityId other;
    int direction;  // 0 outgoing, 1 incoming
    const Triple* triple;
    auto key() const { return std::tie(relation, other, direction); }
  };
  std::map<EntityId, std::vector<Incident>> adj;
  for (const Triple& t : g) {
    adj[t.head].push_back({t.relation, t.tail, 0, &t});
    if (t.head != t.tail) adj[t.tail].push_back({t.relation, t.head, 1, &t});
  }
  for (auto& [_, v] : adj)
    std::sort(v.begin(), v.end(), [](const Incident& a, const Incident& b) { return a.key() < b.key(); });

  std::map<EntityId, std::string> var_of;
  var_of[answer] = "answer";
  std::size_t next_var = 1;
  auto term_for = [&](const EntityId& n) {
    if (seeds.count(n)) return Term::constant(n.str());
    auto it = var_of.find(n);
    if (it == var_of.end()) it = var_of.emplace(n, "v" + std::to_string(next_var++)).first;
    return Term::variable(it->second);
  };

  QueryAst ast;
  ast.form = QueryForm::Select;
  ast.projection = {"answer"};
  std::set<const Triple*> emitted;
  std::set<EntityId> visited{answer};
  std::deque<EntityId> queue{answer};
  auto emit = [&](const Triple& t) {
    if (!emitted.insert(&t).second) return;
    ast.where.push_back(TriplePattern{term_for(t.head), Term::constant(t.relation.str()), term_for(t.tail)});
  };
  auto drain = [&]() {
    while (!queue.empty()) {
      const EntityId u = queue.front();
      queue.pop_front();
      for (const Incident& inc : adj[u]) {
        // Name the neighbour before rendering so naming follows discovery order.
        term_for(inc.other);
        emit(*inc.triple);
        if (visited.insert(inc.other).second) queue.push_back(inc.other);
      }
    }
  };
  drain();
  // Disconnected input: continue from the smallest unvisited node.
  for (const auto& n : nodes) {
    if (visited.insert(n).second) {
      queue.push_back(n);
      drain();
    }
  }
  return ast;
}

}  // namespace synthkgqa::sparql
