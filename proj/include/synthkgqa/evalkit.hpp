#pragma once

// Retrieval and answer scoring against dataset records, plus grouped
// aggregation.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "synthkgqa/datapoint.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"

namespace synthkgqa::eval {

/// Case-folds ASCII letters, drops braces, collapses runs of whitespace
/// and trims.
inline std::string normalize_answer_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (c == '{' || c == '}') {
      pending_space = true;
      continue;
    }
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  return out;
}

struct HitRecall {
  double hit = 0.0;
  double recall = 0.0;
};

/// A gold label matches when its normalized form is a substring of the
/// normalized output.
inline HitRecall em_scores(std::string_view model_output, const std::vector<std::string>& gold_labels) {
  if (gold_labels.empty()) throw ArgumentError("em_scores needs at least one gold label");
  const std::string out = normalize_answer_text(model_output);
  std::size_t matched = 0;
  for (const auto& g : gold_labels) {
    const std::string n = normalize_answer_text(g);
    if (!n.empty() && out.find(n) != std::string::npos) ++matched;
  }
  return {matched > 0 ? 1.0 : 0.0, static_cast<double>(matched) / static_cast<double>(gold_labels.size())};
}

enum class TripleMatch { Exact, InverseTolerant };

struct TripleScores {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::size_t n_retrieved = 0;  // distinct
  std::size_t n_target = 0;
  std::size_t n_matched_target = 0;
  std::size_t n_matched_retrieved = 0;
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Set-based recall/precision of retrieved triples against a target set.
/// In inverse-tolerant mode a triple also matches its reverse.
inline TripleScores triple_scores(const std::vector<Triple>& retrieved, const TripleSet& target,
                                  TripleMatch mode = TripleMatch::Exact) {
  const TripleSet got(retrieved.begin(), retrieved.end());
  auto key = [&](const Triple& t) {
    if (mode == TripleMatch::Exact || !(t.tail < t.head)) return std::tie(t.head, t.relation, t.tail);
    return std::tie(t.tail, t.relation, t.head);
  };
  using Key = std::tuple<EntityId, RelationId, EntityId>;
  std::set<Key> got_keys, target_keys;
  for (const auto& t : got) got_keys.insert(key(t));
  for (const auto& t : target) target_keys.insert(key(t));
  TripleScores s;
  s.n_retrieved = got.size();
  s.n_target = target.size();
  for (const auto& t : target) s.n_matched_target += got_keys.count(key(t));
  for (const auto& t : got) s.n_matched_retrieved += target_keys.count(key(t));
  s.recall = target.empty() ? 0.0 : static_cast<double>(s.n_matched_target) / static_cast<double>(target.size());
  s.precision = got.empty() ? 0.0 : static_cast<double>(s.n_matched_retrieved) / static_cast<double>(got.size());
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

/// Answer nodes touched by the retrieved triples.
inline HitRecall answer_node_scores(const std::vector<Triple>& retrieved, const EntitySet& answers) {
  if (answers.empty()) throw ArgumentError("answer_node_scores needs at least one answer");
  const auto nodes = nodes_of(retrieved);
  std::size_t covered = 0;
  for (const auto& a : answers) covered += nodes.count(a);
  return {covered > 0 ? 1.0 : 0.0, static_cast<double>(covered) / static_cast<double>(answers.size())};
}

struct RetrievalResult {
  std::string question_id;
  std::vector<Triple> retrieved_triples;
  std::string model_output;
  std::optional<std::vector<std::string>> model_answers;
};

struct EvalRecord {
  std::string question_id;
  double em_hit = 0.0;
  double em_recall = 0.0;
  double gt_triple_recall = 0.0;
  double gt_triple_precision = 0.0;
  double gt_triple_f1 = 0.0;
  double answer_hit = 0.0;
  double answer_recall = 0.0;
  std::size_t n_retrieved = 0;
};

struct ScoreOptions {
  std::string kg_name = "wikikg2";
  TripleMatch match = TripleMatch::Exact;
  const KnowledgeGraph* labels = nullptr;  // labels for answers other than answer_node
};

/// Gold labels of a datapoint: every answer on the chosen KG that has a
/// known label, falling back to the answer node.
inline std::vector<std::string> gold_labels(const Datapoint& dp, const ScoreOptions& opt) {
  std::vector<std::string> out;
  for (const auto& a : dp.answers(opt.kg_name)) {
    if (a == dp.answer_node.id) out.push_back(dp.answer_node.label);
    else if (opt.labels && opt.labels->has_entity(a) && opt.labels->has_explicit_label(a)) out.push_back(opt.labels->entity_label(a));
  }
  if (out.empty()) out.push_back(dp.answer_node.label);
  return out;
}

inline EvalRecord score_record(const Datapoint& dp, const RetrievalResult& r, const ScoreOptions& opt = {}) {
  EvalRecord rec;
  rec.question_id = dp.id;
  std::string text = r.model_output;
  if (r.model_answers)
    for (const auto& a : *r.model_answers) text += " " + a;
  const auto em = em_scores(text, gold_labels(dp, opt));
  rec.em_hit = em.hit;
  rec.em_recall = em.recall;
  TripleSet target = dp.full_subgraph(opt.kg_name);
  if (!dp.find_kg(opt.kg_name)) target = dp.gt();
  const auto ts = triple_scores(r.retrieved_triples, target, opt.match);
  rec.gt_triple_recall = ts.recall;
  rec.gt_triple_precision = ts.precision;
  rec.gt_triple_f1 = ts.f1;
  rec.n_retrieved = ts.n_retrieved;
  EntitySet answers = dp.answers(opt.kg_name);
  if (answers.empty()) answers.insert(dp.answer_node.id);
  const auto an = answer_node_scores(r.retrieved_triples, answers);
  rec.answer_hit = an.hit;
  rec.answer_recall = an.recall;
  return rec;
}

enum class GroupBy { None, Isomorphism, NHops, TestType };

inline GroupBy parse_group_by(std::string_view s) {
  if (s == "none") return GroupBy::None;
  if (s == "isomorphism") return GroupBy::Isomorphism;
  if (s == "n_hops") return GroupBy::NHops;
  if (s == "test_type") return GroupBy::TestType;
  throw ArgumentError("unknown group-by '" + std::string(s) + "' (none, isomorphism, n_hops, test_type)");
}

inline constexpr const char* kMetricNames[] = {"em_hit",       "em_recall",  "gt_triple_recall", "gt_triple_precision",
                                               "gt_triple_f1", "answer_hit", "answer_recall",    "n_retrieved"};

inline std::vector<double> metric_values(const EvalRecord& r) {
  return {r.em_hit, r.em_recall, r.gt_triple_recall, r.gt_triple_precision, r.gt_triple_f1, r.answer_hit,
          r.answer_recall, static_cast<double>(r.n_retrieved)};
}

struct GroupRow {
  std::string group;
  std::size_t size = 0;
  std::vector<double> means;  // per kMetricNames; rates in percent
  std::optional<double> em_delta;  // percent points vs. baseline
};

struct Report {
  GroupBy group_by = GroupBy::None;
  std::vector<GroupRow> rows;
};

namespace detail {

inline bool group_less(const std::string& a, const std::string& b) {
  auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (digits(a) && digits(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

inline std::vector<std::string> groups_of(const Datapoint& dp, GroupBy g) {
  switch (g) {
    case GroupBy::None: return {"all"};
    case GroupBy::Isomorphism: return {dp.graph_isomorphism};
    case GroupBy::NHops: return {std::to_string(dp.n_hops)};
    case GroupBy::TestType:
      if (dp.test_type.empty()) return {"untagged"};
      return dp.test_type;
  }
  return {"all"};
}

using Grouped = std::map<std::string, std::vector<const EvalRecord*>, decltype(&group_less)>;

inline Grouped group_records(const std::vector<EvalRecord>& records, const std::map<std::string, const Datapoint*>& by_id,
                             GroupBy g) {
  Grouped out(&group_less);
  std::vector<std::string> unknown;
  for (const auto& r : records) {
    auto it = by_id.find(r.question_id);
    if (it == by_id.end()) {
      unknown.push_back(r.question_id);
      continue;
    }
    for (const auto& key : groups_of(*it->second, g)) out[key].push_back(&r);
  }
  if (!unknown.empty()) throw JoinError(unknown);
  return out;
}

}  // namespace detail

/// Per-group metric means (rates scaled to percent). With a baseline,
/// each row also carries its EM-hit difference against the baseline's
/// mean over the same group.
inline Report aggregate_report(const std::vector<EvalRecord>& records, const std::vector<Datapoint>& dataset, GroupBy g,
                               const std::vector<EvalRecord>* baseline = nullptr) {
  std::map<std::string, const Datapoint*> by_id;
  for (const auto& dp : dataset) by_id[dp.id] = &dp;
  const auto groups = detail::group_records(records, by_id, g);
  std::optional<detail::Grouped> base;
  if (baseline) base = detail::group_records(*baseline, by_id, g);

  auto mean_of = [](const std::vector<const EvalRecord*>& rs) {
    std::vector<double> sum(std::size(kMetricNames), 0.0);
    for (const auto* r : rs) {
      const auto v = metric_values(*r);
      for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] /= static_cast<double>(rs.size());
      if (i + 1 < sum.size()) sum[i] *= 100.0;
    }
    return sum;
  };

  Report report;
  report.group_by = g;
  for (const auto& [key, rs] : groups) {
    GroupRow row;
    row.group = key;
    row.size = rs.size();
    row.means = mean_of(rs);
    if (base) {
      auto it = base->find(key);
      if (it != base->end()) row.em_delta = row.means[0] - mean_of(it->second)[0];
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline void write_tsv(std::ostream& out, const Report& report) {
  out << "group\tn";
  for (const char* m : kMetricNames) out << '\t' << m;
  const bool delta = std::any_of(report.rows.begin(), report.rows.end(), [](const GroupRow& r) { return r.em_delta.has_value(); });
  if (delta) out << "\tem_hit_delta";
  out << '\n';
  char buf[64];
  for (const auto& row : report.rows) {
    out << row.group << '\t' << row.size;
    for (double v : row.means) {
      std::snprintf(buf, sizeof buf, "%.2f", v);
      out << '\t' << buf;
    }
    if (delta) {
      if (row.em_delta) {
        std::snprintf(buf, sizeof buf, "%+.2f", *row.em_delta);
        out << '\t' << buf;
      } else {
        out << "\t";
      }
    }
    out << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Report& report) {
  static const char* names[] = {"none", "isomorphism", "n_hops", "test_type"};
  nlohmann::ordered_json j;
  j["group_by"] = names[static_cast<int>(report.group_by)];
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json g;
    g["group"] = row.group;
    g["n"] = row.size;
    for (std::size_t i = 0; i < row.means.size(); ++i) g[kMetricNames[i]] = row.means[i];
    if (row.em_delta) g["em_hit_delta"] = *row.em_delta;
    j["groups"].push_back(g);
  }
  return j;
}

inline nlohmann::ordered_json to_json(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["question_id"] = r.question_id;
  const auto v = metric_values(r);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) j[kMetricNames[i]] = v[i];
  j["n_retrieved"] = r.n_retrieved;
  return j;
}

/// One JSON object per line: question_id, retrieved_triples ([[h, r, t], ...]),
/// model_output and optionally model_answers.
inline std::vector<RetrievalResult> read_results(std::istream& in) {
  std::vector<RetrievalResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& msg) { throw ParseError("retrieval result: " + msg, line_no, 0); };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(e.what());
    }
    if (!j.is_object()) fail("expected an object");
    RetrievalResult r;
    static const std::set<std::string> known = {"question_id", "retrieved_triples", "model_output", "model_answers"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) fail("unknown field '" + it.key() + "'");
    if (!j.contains("question_id")) fail("missing question_id");
    const auto& qid = j["question_id"];
    if (qid.is_number_integer()) r.question_id = std::to_string(qid.get<long long>());
    else if (qid.is_string()) r.question_id = qid.get<std::string>();
    else fail("question_id must be an integer or string");
    if (j.contains("retrieved_triples")) {
      if (!j["retrieved_triples"].is_array()) fail("retrieved_triples must be a list");
      for (const auto& t : j["retrieved_triples"]) {
        if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_string() || !t[2].is_string())
          fail("triples must be 3-element string lists");
        r.retrieved_triples.push_back(make_triple(t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()));
      }
    }
    if (j.contains("model_output")) {
      if (!j["model_output"].is_string()) fail("model_output must be a string");
      r.model_output = j["model_output"].get<std::string>();
    }
    if (j.contains("model_answers")) {
      if (!j["model_answers"].is_array()) fail("model_answers must be a list");
      std::vector<std::string> answers;
      for (const auto& a : j["model_answers"]) {
        if (!a.is_string()) fail("model_answers must be strings");
        answers.push_back(a.get<std::string>());
      }
      r.model_answers = std::move(answers);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace synthkgqa::eval
