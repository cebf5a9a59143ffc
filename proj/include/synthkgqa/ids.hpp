#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synthkgqa/errors.hpp"

namespace synthkgqa {

/// Opaque, non-empty identifier. The tag keeps entity and relation ids
/// from being mixed up.
template <class Tag>
class BasicId {
 public:
  BasicId() = default;
  explicit BasicId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) throw ArgumentError("identifier must be non-empty");
  }

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const BasicId&, const BasicId&) = default;
  friend bool operator==(const BasicId&, const BasicId&) = default;
  friend std::ostream& operator<<(std::ostream& os, const BasicId& id) { return os << id.value_; }

 private:
  std::string value_;
};

using EntityId = BasicId<struct EntityTag>;
using RelationId = BasicId<struct RelationTag>;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend auto operator<=>(const Triple&, const Triple&) = default;
  friend bool operator==(const Triple&, const Triple&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Triple& t) {
  return os << "(" << t.head << ", " << t.relation << ", " << t.tail << ")";
}

inline Triple make_triple(std::string head, std::string relation, std::string tail) {
  return Triple{EntityId(std::move(head)), RelationId(std::move(relation)),
                EntityId(std::move(tail))};
}

using TripleSet = std::set<Triple>;
using EntitySet = std::set<EntityId>;

/// Entity ids touched by a triple collection.
template <class Range>
EntitySet nodes_of(const Range& triples) {
  EntitySet out;
  for (const Triple& t : triples) {
    out.insert(t.head);
    out.insert(t.tail);
  }
  return out;
}

// "Label (ID)" strings as used in prompts and dataset records.

struct LabeledEntity {
  EntityId id;
  std::string label;

  friend bool operator==(const LabeledEntity&, const LabeledEntity&) = default;
};

struct LabeledRelation {
  RelationId id;
  std::string label;

  friend bool operator==(const LabeledRelation&, const LabeledRelation&) = default;
};

struct LabeledTriple {
  LabeledEntity head;
  LabeledRelation relation;
  LabeledEntity tail;

  Triple triple() const { return Triple{head.id, relation.id, tail.id}; }
  friend bool operator==(const LabeledTriple&, const LabeledTriple&) = default;
};

inline std::string format_labeled(std::string_view label, std::string_view id) {
  std::string out;
  out.reserve(label.size() + id.size() + 3);
  out.append(label.empty() ? id : label);
  out.append(" (");
  out.append(id);
  out.push_back(')');
  return out;
}

inline std::string format_labeled(const LabeledEntity& e) { return format_labeled(e.label, e.id.str()); }
inline std::string format_labeled(const LabeledRelation& r) { return format_labeled(r.label, r.id.str()); }

/// Splits "Label (ID)" on the last parenthesised group. Returns false when
/// the string does not end in a non-empty "(...)" group.
inline bool split_labeled(std::string_view text, std::string& label, std::string& id) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty() || text.back() != ')') return false;
  const auto open = text.rfind('(');
  if (open == std::string_view::npos) return false;
  std::string_view inner = text.substr(open + 1, text.size() - open - 2);
  if (inner.empty()) return false;
  std::string_view head = text.substr(0, open);
  while (!head.empty() && head.back() == ' ') head.remove_suffix(1);
  while (!head.empty() && head.front() == ' ') head.remove_prefix(1);
  label.assign(head);
  id.assign(inner);
  if (label.empty()) label = id;
  return true;
}

}  // namespace synthkgqa

template <class Tag>
struct std::hash<synthkgqa::BasicId<Tag>> {
  std::size_t operator()(const synthkgqa::BasicId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

template <>
struct std::hash<synthkgqa::Triple> {
  std::size_t operator()(const synthkgqa::Triple& t) const noexcept {
    std::size_t h = std::hash<std::string>{}(t.head.str());
    h ^= std::hash<std::string>{}(t.relation.str()) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::string>{}(t.tail.str()) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};
