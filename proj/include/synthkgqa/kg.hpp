#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"

namespace synthkgqa {

using NodeIndex = std::uint32_t;
using RelIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;

/// Interned triple. Edges of a KnowledgeGraph are stored sorted by
/// (head, relation, tail) with duplicates removed.
struct Edge {
  NodeIndex head;
  RelIndex relation;
  NodeIndex tail;

  friend auto operator<=>(const Edge&, const Edge&) = default;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct LoadOptions {
  /// When a label file is supplied, every id used by a triple must be
  /// labeled in it. Without a label file ids label themselves.
  bool require_labels = true;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/// Immutable labeled multi-relational graph with adjacency indexes in both
/// directions. Safe to share between threads once built.
class KnowledgeGraph {
 public:
  class Builder;

  KnowledgeGraph() { finalize({}); }

  /// Reads `head<TAB>relation<TAB>tail` rows and optional `id<TAB>label` rows.
  static KnowledgeGraph load(std::istream& triples, std::istream* entity_labels = nullptr,
                             std::istream* relation_labels = nullptr, LoadOptions options = {});

  static KnowledgeGraph load_files(const std::filesystem::path& triples,
                                   const std::optional<std::filesystem::path>& entity_labels = {},
                                   const std::optional<std::filesystem::path>& relation_labels = {},
                                   LoadOptions options = {});

  /// Convenience for small in-memory graphs; ids label themselves unless
  /// given in `labels` (entity and relation ids share the map).
  static KnowledgeGraph from_triples(const std::vector<Triple>& triples,
                                     const std::vector<std::pair<std::string, std::string>>& labels = {},
                                     const std::vector<EntityId>& isolated = {});

  std::size_t num_triples() const noexcept { return edges_.size(); }
  std::size_t num_entities() const noexcept { return entity_ids_.size(); }
  std::size_t num_relations() const noexcept { return relation_ids_.size(); }

  std::optional<NodeIndex> find_entity(const std::string& id) const {
    auto it = entity_index_.find(id);
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<RelIndex> find_relation(const std::string& id) const {
    auto it = relation_index_.find(id);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
  }
  bool has_entity(const EntityId& id) const { return find_entity(id.str()).has_value(); }

  NodeIndex entity_index(const EntityId& id) const {
    if (auto idx = find_entity(id.str())) return *idx;
    throw NotFoundError(id.str());
  }

  const std::string& entity_id(NodeIndex n) const { return entity_ids_.at(n); }
  const std::string& relation_id(RelIndex r) const { return relation_ids_.at(r); }
  EntityId entity(NodeIndex n) const { return EntityId(entity_ids_.at(n)); }
  RelationId relation(RelIndex r) const { return RelationId(relation_ids_.at(r)); }

  const std::string& entity_label(NodeIndex n) const {
    const auto& l = entity_labels_.at(n);
    return l.empty() ? entity_ids_[n] : l;
  }
  const std::string& relation_label(RelIndex r) const {
    const auto& l = relation_labels_.at(r);
    return l.empty() ? relation_ids_[r] : l;
  }
  /// Label of a registered id, or the id itself when unknown.
  std::string entity_label(const EntityId& id) const {
    if (auto n = find_entity(id.str())) return entity_label(*n);
    return id.str();
  }
  std::string relation_label(const RelationId& id) const {
    if (auto r = find_relation(id.str())) return relation_label(*r);
    return id.str();
  }
  bool has_explicit_label(const EntityId& id) const {
    auto n = find_entity(id.str());
    return n && !entity_labels_[*n].empty();
  }
  bool has_explicit_label(const RelationId& id) const {
    auto r = find_relation(id.str());
    return r && !relation_labels_[*r].empty();
  }

  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
  Triple triple(EdgeIndex e) const {
    const Edge& x = edges_.at(e);
    return Triple{entity(x.head), relation(x.relation), entity(x.tail)};
  }

  /// Outgoing edges of `n`, sorted by (relation, tail). The index of
  /// out_edges(n)[i] is out_begin(n) + i.
  std::span<const Edge> out_edges(NodeIndex n) const {
    return std::span<const Edge>(edges_).subspan(out_offsets_[n], out_offsets_[n + 1] - out_offsets_[n]);
  }
  EdgeIndex out_begin(NodeIndex n) const { return out_offsets_[n]; }

  /// Incoming edge indexes of `n`, sorted by (relation, head).
  std::span<const EdgeIndex> in_edges(NodeIndex n) const {
    return std::span<const EdgeIndex>(in_index_).subspan(in_offsets_[n], in_offsets_[n + 1] - in_offsets_[n]);
  }

  /// Edge indexes with relation `r`, in edge order.
  std::span<const EdgeIndex> relation_edges(RelIndex r) const {
    return std::span<const EdgeIndex>(rel_index_).subspan(rel_offsets_[r], rel_offsets_[r + 1] - rel_offsets_[r]);
  }

  /// Calls f(edge_index, other_endpoint) for every incident edge; self
  /// loops are reported twice, once per direction.
  template <class F>
  void for_each_incident(NodeIndex n, F&& f) const {
    const EdgeIndex begin = out_offsets_[n];
    for (EdgeIndex e = begin; e < out_offsets_[n + 1]; ++e) f(e, edges_[e].tail);
    for (EdgeIndex e : in_edges(n)) f(e, edges_[e].head);
  }

  std::size_t degree(NodeIndex n) const {
    return (out_offsets_[n + 1] - out_offsets_[n]) + (in_offsets_[n + 1] - in_offsets_[n]);
  }
  std::size_t degree(const EntityId& id) const { return degree(entity_index(id)); }

  /// Distinct undirected neighbors in ascending index order.
  std::vector<NodeIndex> neighbor_indexes(NodeIndex n) const {
    std::vector<NodeIndex> out;
    out.reserve(degree(n));
    for_each_incident(n, [&](EdgeIndex, NodeIndex other) { out.push_back(other); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  EntitySet neighbors(const EntityId& id) const {
    EntitySet out;
    for (NodeIndex n : neighbor_indexes(entity_index(id))) out.insert(entity(n));
    return out;
  }

  std::optional<EdgeIndex> find_edge(NodeIndex h, RelIndex r, NodeIndex t) const {
    const Edge key{h, r, t};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    return static_cast<EdgeIndex>(it - edges_.begin());
  }
  std::optional<EdgeIndex> find_edge(const Triple& t) const {
    auto h = find_entity(t.head.str());
    auto r = find_relation(t.relation.str());
    auto o = find_entity(t.tail.str());
    if (!h || !r || !o) return std::nullopt;
    return find_edge(*h, *r, *o);
  }
  bool contains(const Triple& t) const { return find_edge(t).has_value(); }

  std::vector<Triple> triples() const {
    std::vector<Triple> out;
    out.reserve(edges_.size());
    for (EdgeIndex e = 0; e < edges_.size(); ++e) out.push_back(triple(e));
    return out;
  }

 private:
  void finalize(std::vector<Edge> edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    const std::size_t n = entity_ids_.size();
    out_offsets_.assign(n + 1, 0);
    in_offsets_.assign(n + 1, 0);
    rel_offsets_.assign(relation_ids_.size() + 1, 0);
    for (const Edge& e : edges_) {
      ++out_offsets_[e.head + 1];
      ++in_offsets_[e.tail + 1];
      ++rel_offsets_[e.relation + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      out_offsets_[i + 1] += out_offsets_[i];
      in_offsets_[i + 1] += in_offsets_[i];
    }
    for (std::size_t i = 0; i + 1 < rel_offsets_.size(); ++i) rel_offsets_[i + 1] += rel_offsets_[i];

    in_index_.resize(edges_.size());
    rel_index_.resize(edges_.size());
    std::vector<EdgeIndex> in_fill(in_offsets_.begin(), in_offsets_.end() - 1);
    std::vector<EdgeIndex> rel_fill(rel_offsets_.begin(), rel_offsets_.end() - 1);
    for (EdgeIndex e = 0; e < edges_.size(); ++e) {
      in_index_[in_fill[edges_[e].tail]++] = e;
      rel_index_[rel_fill[edges_[e].relation]++] = e;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto first = in_index_.begin() + in_offsets_[i];
      auto last = in_index_.begin() + in_offsets_[i + 1];
      std::sort(first, last, [this](EdgeIndex a, EdgeIndex b) {
        const Edge& x = edges_[a];
        const Edge& y = edges_[b];
        return std::tie(x.relation, x.head) < std::tie(y.relation, y.head);
      });
    }
  }

  std::vector<std::string> entity_ids_;
  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_ids_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, NodeIndex> entity_index_;
  std::unordered_map<std::string, RelIndex> relation_index_;

  std::vector<Edge> edges_;
  std::vector<EdgeIndex> out_offsets_;
  std::vector<EdgeIndex> in_index_;
  std::vector<EdgeIndex> in_offsets_;
  std::vector<EdgeIndex> rel_index_;
  std::vector<EdgeIndex> rel_offsets_;
};

/// Accumulates ids, labels and triples, then freezes them into a
/// KnowledgeGraph.
class KnowledgeGraph::Builder {
 public:
  NodeIndex add_entity(std::string_view id) {
    return intern(id, graph_.entity_ids_, graph_.entity_labels_, graph_.entity_index_);
  }
  RelIndex add_relation(std::string_view id) {
    return intern(id, graph_.relation_ids_, graph_.relation_labels_, graph_.relation_index_);
  }
  void set_entity_label(std::string_view id, std::string label) {
    graph_.entity_labels_[add_entity(id)] = std::move(label);
  }
  void set_relation_label(std::string_view id, std::string label) {
    graph_.relation_labels_[add_relation(id)] = std::move(label);
  }
  void add_triple(std::string_view head, std::string_view relation, std::string_view tail) {
    const NodeIndex h = add_entity(head);
    const RelIndex r = add_relation(relation);
    const NodeIndex t = add_entity(tail);
    edges_.push_back(Edge{h, r, t});
  }
  void add_triple(const Triple& t) { add_triple(t.head.str(), t.relation.str(), t.tail.str()); }

  /// Ids that appear in triples but carry no label.
  std::vector<std::string> unlabeled_entities() const { return unlabeled(graph_.entity_ids_, graph_.entity_labels_, true); }
  std::vector<std::string> unlabeled_relations() const { return unlabeled(graph_.relation_ids_, graph_.relation_labels_, false); }

  KnowledgeGraph build() && {
    graph_.finalize(std::move(edges_));
    return std::move(graph_);
  }

 private:
  template <class Index>
  static std::uint32_t intern(std::string_view id, std::vector<std::string>& ids,
                              std::vector<std::string>& labels,
                              std::unordered_map<std::string, Index>& index) {
    if (id.empty()) throw ArgumentError("identifier must be non-empty");
    std::string key(id);
    auto [it, inserted] = index.try_emplace(key, static_cast<Index>(ids.size()));
    if (inserted) {
      ids.push_back(std::move(key));
      labels.emplace_back();
    }
    return it->second;
  }

  std::vector<std::string> unlabeled(const std::vector<std::string>& ids,
                                     const std::vector<std::string>& labels, bool entities) const {
    std::vector<char> used(ids.size(), 0);
    for (const Edge& e : edges_) {
      if (entities) {
        used[e.head] = used[e.tail] = 1;
      } else {
        used[e.relation] = 1;
      }
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (used[i] && labels[i].empty()) out.push_back(ids[i]);
    std::sort(out.begin(), out.end());
    return out;
  }

  KnowledgeGraph graph_;
  std::vector<Edge> edges_;
};

namespace detail {

/// Returns the number of label rows read.
template <class Set>
std::size_t read_labels(std::istream& in, Set&& set, const char* what) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  std::unordered_map<std::string, std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw ParseError(std::string("malformed ") + what + " label row", line_no, 0);
    std::string id = line.substr(0, tab);
    std::string label = line.substr(tab + 1);
    auto [it, inserted] = seen.try_emplace(id, label);
    if (!inserted && it->second != label)
      throw ParseError(std::string("conflicting ") + what + " labels for " + id, line_no, 0);
    set(id, std::move(label));
    ++rows;
  }
  return rows;
}

}  // namespace detail

inline KnowledgeGraph KnowledgeGraph::load(std::istream& triples, std::istream* entity_labels,
                                           std::istream* relation_labels, LoadOptions options) {
  Builder builder;
  std::size_t entity_rows = 0;
  std::size_t relation_rows = 0;
  if (entity_labels)
    entity_rows = detail::read_labels(*entity_labels, [&](const std::string& id, std::string label) {
      builder.set_entity_label(id, std::move(label));
    }, "entity");
  if (relation_labels)
    relation_rows = detail::read_labels(*relation_labels, [&](const std::string& id, std::string label) {
      builder.set_relation_label(id, std::move(label));
    }, "relation");

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(triples, line)) {
    ++line_no;
    detail::chomp(line);
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw ParseError("expected head<TAB>relation<TAB>tail", line_no, 0);
    builder.add_triple(fields[0], fields[1], fields[2]);
  }

  if (options.require_labels) {
    std::vector<std::string> missing;
    if (entity_rows > 0) missing = builder.unlabeled_entities();
    if (relation_rows > 0) {
      auto rel = builder.unlabeled_relations();
      missing.insert(missing.end(), rel.begin(), rel.end());
    }
    if (!missing.empty()) {
      std::string msg = "triples reference " + std::to_string(missing.size()) + " unlabeled ids:";
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
      if (missing.size() > 20) msg += " ...";
      throw LoadError(msg, std::move(missing));
    }
  }
  return std::move(builder).build();
}

inline KnowledgeGraph KnowledgeGraph::load_files(const std::filesystem::path& triples,
                                                 const std::optional<std::filesystem::path>& entity_labels,
                                                 const std::optional<std::filesystem::path>& relation_labels,
                                                 LoadOptions options) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw LoadError("cannot open " + p.string(), {});
    return in;
  };
  std::ifstream triple_in = open(triples);
  std::optional<std::ifstream> ent_in, rel_in;
  if (entity_labels) ent_in = open(*entity_labels);
  if (relation_labels) rel_in = open(*relation_labels);
  return load(triple_in, ent_in ? &*ent_in : nullptr, rel_in ? &*rel_in : nullptr, options);
}

inline KnowledgeGraph KnowledgeGraph::from_triples(const std::vector<Triple>& triples,
                                                   const std::vector<std::pair<std::string, std::string>>& labels,
                                                   const std::vector<EntityId>& isolated) {
  std::set<std::string> entities, relations;
  for (const auto& id : isolated) entities.insert(id.str());
  for (const Triple& t : triples) {
    entities.insert(t.head.str());
    entities.insert(t.tail.str());
    relations.insert(t.relation.str());
  }
  Builder builder;
  for (const auto& id : isolated) builder.add_entity(id.str());
  for (const Triple& t : triples) builder.add_triple(t);
  // Labels only attach to ids registered by a triple or `isolated`.
  for (const auto& [id, label] : labels) {
    if (entities.count(id)) builder.set_entity_label(id, label);
    if (relations.count(id)) builder.set_relation_label(id, label);
  }
  return std::move(builder).build();
}

}  // namespace synthkgqa
