#pragma once

#include <map>
#include <string>
#include <vector>

#include "synthkgqa/ids.hpp"
#include "synthkgqa/taxonomy.hpp"

namespace synthkgqa {

/// Answers and full answer subgraph of a question on one evaluation KG.
struct KgAnswers {
  std::vector<EntityId> all_answers;
  std::vector<Triple> full_answer_subgraph;

  friend bool operator==(const KgAnswers&, const KgAnswers&) = default;
};

/// One dataset record. Field names follow the released record layout.
struct Datapoint {
  std::string id;  // numeric ids are kept as their decimal text
  std::string question;
  std::string paraphrased_question;
  std::vector<LabeledEntity> seed_entities;
  LabeledEntity answer_node;
  std::vector<LabeledTriple> answer_subgraph;
  std::string sparql_query;
  std::map<std::string, KgAnswers> kgs;  // keyed by KG name, e.g. "wikidata"
  unsigned n_hops = 0;
  std::string graph_isomorphism;
  bool redundant = false;
  std::string minimal_graph_isomorphism;
  std::map<std::string, std::string> minimal_seeds_and_queries;
  std::vector<std::string> test_type;

  EntitySet seeds() const {
    EntitySet out;
    for (const auto& s : seed_entities) out.insert(s.id);
    return out;
  }
  TripleSet gt() const {
    TripleSet out;
    for (const auto& t : answer_subgraph) out.insert(t.triple());
    return out;
  }
  AnswerTree tree() const { return AnswerTree{gt(), seeds(), answer_node.id}; }

  const KgAnswers* find_kg(const std::string& name) const {
    auto it = kgs.find(name);
    return it == kgs.end() ? nullptr : &it->second;
  }
  TripleSet full_subgraph(const std::string& kg_name) const {
    const auto* k = find_kg(kg_name);
    if (!k) return {};
    return {k->full_answer_subgraph.begin(), k->full_answer_subgraph.end()};
  }
  EntitySet answers(const std::string& kg_name) const {
    const auto* k = find_kg(kg_name);
    if (!k) return {};
    return {k->all_answers.begin(), k->all_answers.end()};
  }

  friend bool operator==(const Datapoint&, const Datapoint&) = default;
};

using ValidatedDatapoint = Datapoint;

}  // namespace synthkgqa
