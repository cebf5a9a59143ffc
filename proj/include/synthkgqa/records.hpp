#pragma once

// JSON Lines codec for dataset records.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthkgqa/datapoint.hpp"
#include "synthkgqa/errors.hpp"

namespace synthkgqa::records {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kAnswersPrefix = "all_answers_";
inline constexpr std::string_view kFullSubgraphPrefix = "full_answer_subgraph_";

namespace detail {

inline bool plain_integer(const std::string& s) {
  if (s.empty() || s.size() > 18) return false;
  if (s.size() > 1 && s[0] == '0') return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline Json labeled_triple_json(const LabeledTriple& t) {
  return Json::array({format_labeled(t.head), format_labeled(t.relation), format_labeled(t.tail)});
}

class Reader {
 public:
  Reader(const Json& j, std::string record_id) : j_(j), id_(std::move(record_id)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const { throw SchemaError(field, id_, msg); }

  const Json& field(const std::string& name) const {
    auto it = j_.find(name);
    if (it == j_.end()) fail(name, "missing");
    return *it;
  }

  std::string string(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_string()) fail(name, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_boolean()) fail(name, "expected a boolean");
    return v.get<bool>();
  }

  unsigned count(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(name, "expected a non-negative integer");
    return v.get<unsigned>();
  }

  const Json& array(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_array()) fail(name, "expected a list");
    return v;
  }

  std::string id_string(const std::string& name, const Json& v) const {
    if (!v.is_string() || v.get<std::string>().empty()) fail(name, "expected a non-empty id string");
    return v.get<std::string>();
  }

  std::pair<std::string, std::string> labeled(const std::string& name, const Json& v) const {
    if (!v.is_string()) fail(name, "expected a \"Label (ID)\" string");
    std::string label, id;
    if (!split_labeled(v.get<std::string>(), label, id)) fail(name, "expected a \"Label (ID)\" string");
    return {label, id};
  }

  LabeledEntity entity(const std::string& name, const Json& v) const {
    auto [label, id] = labeled(name, v);
    return LabeledEntity{EntityId(id), label};
  }

  const Json& triple_row(const std::string& name, const Json& v) const {
    if (!v.is_array() || v.size() != 3) fail(name, "triples must be 3-element lists");
    return v;
  }

 private:
  const Json& j_;
  std::string id_;
};

}  // namespace detail

inline Json to_json(const Datapoint& dp) {
  Json j;
  if (detail::plain_integer(dp.id)) j["id"] = std::stoll(dp.id);
  else j["id"] = dp.id;
  j["question"] = dp.question;
  j["paraphrased_question"] = dp.paraphrased_question;
  Json seeds = Json::array();
  for (const auto& s : dp.seed_entities) seeds.push_back(format_labeled(s));
  j["seed_entities"] = seeds;
  j["answer_node"] = format_labeled(dp.answer_node);
  Json gt = Json::array();
  for (const auto& t : dp.answer_subgraph) gt.push_back(detail::labeled_triple_json(t));
  j["answer_subgraph"] = gt;
  j["sparql_query"] = dp.sparql_query;
  for (const auto& [name, kg] : dp.kgs) {
    Json answers = Json::array();
    for (const auto& a : kg.all_answers) answers.push_back(a.str());
    Json full = Json::array();
    for (const auto& t : kg.full_answer_subgraph) full.push_back(Json::array({t.head.str(), t.relation.str(), t.tail.str()}));
    j[std::string(kAnswersPrefix) + name] = answers;
    j[std::string(kFullSubgraphPrefix) + name] = full;
  }
  j["n_hops"] = dp.n_hops;
  j["graph_isomorphism"] = dp.graph_isomorphism;
  j["redundant"] = dp.redundant;
  j["minimal_graph_isomorphism"] = dp.minimal_graph_isomorphism;
  Json minimal = Json::object();
  for (const auto& [k, q] : dp.minimal_seeds_and_queries) minimal[k] = q;
  j["minimal_seeds_and_queries"] = minimal;
  j["test_type"] = dp.test_type;
  return j;
}

inline Datapoint from_json(const Json& j) {
  std::string rid;
  if (!j.is_object()) throw SchemaError("<record>", "", "expected an object");
  if (auto it = j.find("id"); it != j.end()) {
    if (it->is_number_integer()) rid = std::to_string(it->get<long long>());
    else if (it->is_string()) rid = it->get<std::string>();
  }
  detail::Reader r(j, rid);
  Datapoint dp;
  if (!j.contains("id")) r.fail("id", "missing");
  if (rid.empty()) r.fail("id", "expected an integer or non-empty string");
  dp.id = rid;

  static const std::set<std::string> fixed = {
      "id", "question", "paraphrased_question", "seed_entities", "answer_node", "answer_subgraph", "sparql_query",
      "n_hops", "graph_isomorphism", "redundant", "minimal_graph_isomorphism", "minimal_seeds_and_queries",
      "test_type"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (fixed.count(key)) continue;
    auto starts = [&](std::string_view p) { return key.size() > p.size() && key.compare(0, p.size(), p) == 0; };
    if (starts(kAnswersPrefix)) {
      const std::string name = key.substr(kAnswersPrefix.size());
      auto& kg = dp.kgs[name];
      for (const auto& a : r.array(key)) kg.all_answers.emplace_back(r.id_string(key, a));
      if (!j.contains(std::string(kFullSubgraphPrefix) + name)) r.fail(std::string(kFullSubgraphPrefix) + name, "missing");
    } else if (starts(kFullSubgraphPrefix)) {
      const std::string name = key.substr(kFullSubgraphPrefix.size());
      auto& kg = dp.kgs[name];
      for (const auto& row : r.array(key)) {
        const auto& t = r.triple_row(key, row);
        kg.full_answer_subgraph.push_back(
            Triple{EntityId(r.id_string(key, t[0])), RelationId(r.id_string(key, t[1])), EntityId(r.id_string(key, t[2]))});
      }
      if (!j.contains(std::string(kAnswersPrefix) + name)) r.fail(std::string(kAnswersPrefix) + name, "missing");
    } else {
      r.fail(key, "unknown field");
    }
  }

  dp.question = r.string("question");
  dp.paraphrased_question = r.string("paraphrased_question");
  for (const auto& s : r.array("seed_entities")) dp.seed_entities.push_back(r.entity("seed_entities", s));
  dp.answer_node = r.entity("answer_node", r.field("answer_node"));
  for (const auto& row : r.array("answer_subgraph")) {
    const auto& t = r.triple_row("answer_subgraph", row);
    auto h = r.entity("answer_subgraph", t[0]);
    auto [rl, rid2] = r.labeled("answer_subgraph", t[1]);
    auto tl = r.entity("answer_subgraph", t[2]);
    dp.answer_subgraph.push_back(LabeledTriple{h, LabeledRelation{RelationId(rid2), rl}, tl});
  }
  dp.sparql_query = r.string("sparql_query");
  dp.n_hops = r.count("n_hops");
  dp.graph_isomorphism = r.string("graph_isomorphism");
  dp.redundant = r.boolean("redundant");
  dp.minimal_graph_isomorphism = r.string("minimal_graph_isomorphism");
  const auto& minimal = r.field("minimal_seeds_and_queries");
  if (!minimal.is_object()) r.fail("minimal_seeds_and_queries", "expected an object");
  for (auto it = minimal.begin(); it != minimal.end(); ++it) {
    if (!it.value().is_string()) r.fail("minimal_seeds_and_queries", "query text must be a string");
    dp.minimal_seeds_and_queries[it.key()] = it.value().get<std::string>();
  }
  static const std::set<std::string> tags = {"in_distribution", "unseen_graph_type", "unseen_relation_type"};
  for (const auto& t : r.array("test_type")) {
    if (!t.is_string() || !tags.count(t.get<std::string>())) r.fail("test_type", "unknown tag");
    dp.test_type.push_back(t.get<std::string>());
  }
  return dp;
}

inline std::string to_line(const Datapoint& dp) { return to_json(dp).dump(); }

inline Datapoint parse_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("<record>", "", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

inline std::vector<Datapoint> read_records(std::istream& in) {
  std::vector<Datapoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    out.push_back(parse_line(line));
  }
  return out;
}

inline std::vector<Datapoint> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return read_records(in);
}

inline void write_records(std::ostream& out, const std::vector<Datapoint>& records) {
  for (const auto& dp : records) out << to_line(dp) << '\n';
}

inline void write_records(const std::filesystem::path& path, const std::vector<Datapoint>& records) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  write_records(out, records);
}

}  // namespace synthkgqa::records
