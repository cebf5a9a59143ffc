#pragma once

// Train/test split design and validation, and dataset statistics.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "synthkgqa/datapoint.hpp"
#include "synthkgqa/taxonomy.hpp"

namespace synthkgqa::split {

struct SplitConstraints {
  std::size_t relation_train_top_k = 200;
  std::size_t min_per_category = 45;
  bool test_nonredundant_only = true;
  std::set<std::string> reserved_test_iso_codes;
  bool answer_disjointness = true;
  /// In-distribution test questions drawn per isomorphism code.
  std::size_t in_distribution_per_iso = 45;
};

inline constexpr const char* kAnswerDisjointness = "answer_disjointness";
inline constexpr const char* kRelationSplit = "relation_split";
inline constexpr const char* kReservedIso = "reserved_iso";
inline constexpr const char* kTestNonredundant = "test_nonredundant";
inline constexpr const char* kMinPerCategory = "min_per_category";
inline constexpr const char* kTestTypeTags = "test_type_tags";

struct Violation {
  std::string constraint;
  std::string detail;
  std::vector<std::string> ids;  // offending question ids (or answer ids for disjointness)
};

/// Relation frequency = number of ground-truth edges using it; the top k
/// are kept, ties broken by ascending id.
inline std::set<std::string> top_relations(const std::vector<const Datapoint*>& records, std::size_t k) {
  std::map<std::string, std::size_t> freq;
  for (const auto* dp : records)
    for (const auto& t : dp->answer_subgraph) ++freq[t.relation.id.str()];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::set<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.insert(ranked[i].first);
  return out;
}

inline std::set<std::string> relations_of(const Datapoint& dp) {
  std::set<std::string> out;
  for (const auto& t : dp.answer_subgraph) out.insert(t.relation.id.str());
  return out;
}

struct TrainStats {
  std::set<std::string> iso_codes;
  std::set<std::string> relations;
};

inline TrainStats train_stats(const std::vector<const Datapoint*>& train) {
  TrainStats s;
  for (const auto* dp : train) {
    s.iso_codes.insert(dp->graph_isomorphism);
    for (const auto& r : relations_of(*dp)) s.relations.insert(r);
  }
  return s;
}

inline std::vector<std::string> expected_tags(const Datapoint& dp, const TrainStats& s) {
  auto tags = tag_test_type(dp.graph_isomorphism, dp.gt(), s.iso_codes, s.relations);
  return {tags.begin(), tags.end()};
}

namespace detail {

template <class T>
std::vector<const T*> pointers(const std::vector<T>& v) {
  std::vector<const T*> out;
  for (const auto& x : v) out.push_back(&x);
  return out;
}

inline std::map<std::pair<std::string, std::string>, std::vector<std::string>> test_cells(
    const std::vector<const Datapoint*>& test) {
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> cells;
  for (const auto* dp : test)
    for (const auto& tag : dp->test_type) cells[{dp->graph_isomorphism, tag}].push_back(dp->id);
  return cells;
}

}  // namespace detail

/// Checks every split constraint independently; an empty result means the
/// split is compliant.
inline std::vector<Violation> validate_split(const std::vector<Datapoint>& train, const std::vector<Datapoint>& test,
                                             const SplitConstraints& c) {
  std::vector<Violation> out;
  const auto tr = detail::pointers(train), te = detail::pointers(test);

  if (c.answer_disjointness) {
    std::set<EntityId> train_answers;
    for (const auto* dp : tr) train_answers.insert(dp->answer_node.id);
    std::set<std::string> shared;
    std::vector<std::string> qids;
    for (const auto* dp : te) {
      if (train_answers.count(dp->answer_node.id)) {
        shared.insert(dp->answer_node.id.str());
        qids.push_back(dp->id);
      }
    }
    if (!shared.empty())
      out.push_back({kAnswerDisjointness, std::to_string(qids.size()) + " test questions share answer nodes with train",
                     {shared.begin(), shared.end()}});
  }

  {
    auto all = tr;
    all.insert(all.end(), te.begin(), te.end());
    const auto top = top_relations(all, c.relation_train_top_k);
    std::vector<std::string> ids;
    std::set<std::string> rels;
    for (const auto* dp : tr) {
      for (const auto& r : relations_of(*dp)) {
        if (!top.count(r)) {
          rels.insert(r);
          if (ids.empty() || ids.back() != dp->id) ids.push_back(dp->id);
        }
      }
    }
    if (!ids.empty()) {
      std::string detail = "train uses relations outside the top " + std::to_string(c.relation_train_top_k) + ":";
      for (const auto& r : rels) detail += " " + r;
      out.push_back({kRelationSplit, detail, ids});
    }
  }

  {
    std::vector<std::string> ids;
    for (const auto* dp : tr)
      if (c.reserved_test_iso_codes.count(dp->graph_isomorphism)) ids.push_back(dp->id);
    if (!ids.empty()) out.push_back({kReservedIso, "reserved isomorphism codes in train", ids});
  }

  if (c.test_nonredundant_only) {
    std::vector<std::string> ids;
    for (const auto* dp : te)
      if (dp->redundant) ids.push_back(dp->id);
    if (!ids.empty()) out.push_back({kTestNonredundant, "redundant questions in test", ids});
  }

  for (const auto& [cell, ids] : detail::test_cells(te)) {
    if (ids.size() < c.min_per_category)
      out.push_back({kMinPerCategory,
                     "test cell " + cell.first + " / " + cell.second + " has " + std::to_string(ids.size()) + " < " +
                         std::to_string(c.min_per_category) + " questions",
                     ids});
  }

  {
    const auto stats = train_stats(tr);
    std::vector<std::string> ids;
    for (const auto* dp : tr)
      if (!dp->test_type.empty()) ids.push_back(dp->id);
    for (const auto* dp : te) {
      auto have = dp->test_type;
      std::sort(have.begin(), have.end());
      if (have != expected_tags(*dp, stats)) ids.push_back(dp->id);
    }
    if (!ids.empty()) out.push_back({kTestTypeTags, "test_type tags disagree with the train split", ids});
  }
  return out;
}

struct SplitReport {
  std::vector<std::pair<std::string, std::string>> dropped;  // question id, reason
  std::vector<std::string> notes;
  std::size_t iterations = 0;
};

struct SplitResult {
  std::vector<Datapoint> train;
  std::vector<Datapoint> test;
  SplitReport report;
};

/// Greedy split. Reserved-code and rare-relation questions are forced
/// into test, each isomorphism code contributes up to
/// `in_distribution_per_iso` further non-redundant test questions, and the
/// rest go to train. Conflicts are then repaired until nothing changes:
/// rare-relation train questions move to test, answer clashes send
/// optional test questions back to train (or drop the train side when the
/// test question is forced), and undersized test cells are dropped.
inline SplitResult design_split(const std::vector<Datapoint>& pool, const SplitConstraints& c) {
  enum class Where { Train, Test, Dropped };
  const std::size_t n = pool.size();
  std::vector<Where> where(n, Where::Train);
  std::vector<char> forced(n, 0);
  SplitResult result;
  auto drop = [&](std::size_t i, const std::string& why) {
    if (where[i] == Where::Dropped) return;
    where[i] = Where::Dropped;
    result.report.dropped.emplace_back(pool[i].id, why);
  };
  auto test_ok = [&](std::size_t i) { return !(c.test_nonredundant_only && pool[i].redundant); };
  auto kept = [&](Where w) {
    std::vector<const Datapoint*> out;
    for (std::size_t i = 0; i < n; ++i)
      if (where[i] == w) out.push_back(&pool[i]);
    return out;
  };
  auto active = [&]() {
    std::vector<const Datapoint*> out;
    for (std::size_t i = 0; i < n; ++i)
      if (where[i] != Where::Dropped) out.push_back(&pool[i]);
    return out;
  };
  auto force_test = [&](std::size_t i, const std::string& why) {
    if (test_ok(i)) {
      where[i] = Where::Test;
      forced[i] = 1;
    } else {
      drop(i, "redundant but " + why);
    }
  };

  // Reserved codes and rare relations.
  auto top = top_relations(active(), c.relation_train_top_k);
  for (std::size_t i = 0; i < n; ++i) {
    if (c.reserved_test_iso_codes.count(pool[i].graph_isomorphism)) {
      force_test(i, "reserved isomorphism code");
      continue;
    }
    for (const auto& r : relations_of(pool[i])) {
      if (!top.count(r)) {
        force_test(i, "relation outside the train set");
        break;
      }
    }
  }
  // In-distribution fill.
  std::map<std::string, std::size_t> per_iso;
  for (std::size_t i = 0; i < n; ++i) {
    if (where[i] != Where::Train || !test_ok(i)) continue;
    if (per_iso[pool[i].graph_isomorphism] >= c.in_distribution_per_iso) continue;
    ++per_iso[pool[i].graph_isomorphism];
    where[i] = Where::Test;
  }

  for (bool changed = true; changed && result.report.iterations < 4 * n + 4;) {
    changed = false;
    ++result.report.iterations;

    top = top_relations(active(), c.relation_train_top_k);
    for (std::size_t i = 0; i < n; ++i) {
      if (where[i] != Where::Train) continue;
      for (const auto& r : relations_of(pool[i])) {
        if (!top.count(r)) {
          force_test(i, "relation outside the train set");
          changed = true;
          break;
        }
      }
    }

    if (c.answer_disjointness) {
      std::map<EntityId, std::vector<std::size_t>> train_by_answer;
      for (std::size_t i = 0; i < n; ++i)
        if (where[i] == Where::Train) train_by_answer[pool[i].answer_node.id].push_back(i);
      for (std::size_t i = 0; i < n; ++i) {
        if (where[i] != Where::Test) continue;
        auto it = train_by_answer.find(pool[i].answer_node.id);
        if (it == train_by_answer.end()) continue;
        changed = true;
        if (!forced[i]) {
          where[i] = Where::Train;
          it->second.push_back(i);
        } else {
          for (auto j : it->second)
            if (where[j] == Where::Train) drop(j, "answer node shared with a forced test question");
          train_by_answer.erase(it);
        }
      }
    }

    // Tags from the current train side, then undersized cells.
    const auto stats = train_stats(kept(Where::Train));
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < n; ++i) {
      if (where[i] != Where::Test) continue;
      for (const auto& tag : expected_tags(pool[i], stats)) cells[{pool[i].graph_isomorphism, tag}].push_back(i);
    }
    for (const auto& [cell, members] : cells) {
      if (members.size() >= c.min_per_category) continue;
      for (auto i : members) {
        if (where[i] != Where::Test) continue;
        changed = true;
        if (!forced[i]) {
          where[i] = Where::Train;  // an in-distribution question can still train
        } else {
          drop(i, "test cell " + cell.first + " / " + cell.second + " below minimum size");
        }
      }
    }
  }

  const auto stats = train_stats(kept(Where::Train));
  for (std::size_t i = 0; i < n; ++i) {
    if (where[i] == Where::Dropped) continue;
    Datapoint dp = pool[i];
    if (where[i] == Where::Train) {
      dp.test_type.clear();
      result.train.push_back(std::move(dp));
    } else {
      dp.test_type = expected_tags(dp, stats);
      result.test.push_back(std::move(dp));
    }
  }
  if (!validate_split(result.train, result.test, c).empty())
    result.report.notes.push_back("constraints could not all be satisfied; see validate_split");
  return result;
}

struct DatasetStats {
  std::size_t questions = 0;
  std::size_t unique_relations = 0;
  std::size_t unique_entities = 0;
  std::size_t unique_iso_codes = 0;
  std::size_t redundant = 0;
  std::optional<double> avg_seeds;
  std::optional<double> avg_hops;
  std::optional<double> avg_answers;
  std::optional<double> avg_gt_edges;
  std::map<std::string, std::size_t> relation_counts;  // questions using each relation
  std::map<std::string, std::size_t> iso_counts;
};

/// Counts and means over a record list. Answer counts use `kg_name` when
/// the record has it, else a single answer.
inline DatasetStats dataset_stats(const std::vector<Datapoint>& records, const std::string& kg_name = "wikikg2") {
  DatasetStats s;
  s.questions = records.size();
  std::set<std::string> entities;
  double seeds = 0, hops = 0, answers = 0, edges = 0;
  for (const auto& dp : records) {
    for (const auto& r : relations_of(dp)) ++s.relation_counts[r];
    for (const auto& t : dp.answer_subgraph) {
      entities.insert(t.head.id.str());
      entities.insert(t.tail.id.str());
    }
    ++s.iso_counts[dp.graph_isomorphism];
    if (dp.redundant) ++s.redundant;
    seeds += static_cast<double>(dp.seed_entities.size());
    hops += dp.n_hops;
    const auto* kg = dp.find_kg(kg_name);
    answers += kg ? static_cast<double>(kg->all_answers.size()) : 1.0;
    edges += static_cast<double>(dp.answer_subgraph.size());
  }
  s.unique_relations = s.relation_counts.size();
  s.unique_entities = entities.size();
  s.unique_iso_codes = s.iso_counts.size();
  if (!records.empty()) {
    const double q = static_cast<double>(records.size());
    s.avg_seeds = seeds / q;
    s.avg_hops = hops / q;
    s.avg_answers = answers / q;
    s.avg_gt_edges = edges / q;
  }
  return s;
}

}  // namespace synthkgqa::split
