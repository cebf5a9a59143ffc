#pragma once

// Candidate generation, validation and the orchestration loop.

#include <algorithm>
#include <cctype>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "synthkgqa/datapoint.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/llm.hpp"
#include "synthkgqa/prompts.hpp"
#include "synthkgqa/sampling.hpp"
#include "synthkgqa/sparql.hpp"
#include "synthkgqa/sparql_eval.hpp"
#include "synthkgqa/taxonomy.hpp"

namespace synthkgqa::pipeline {

enum class RejectionReason {
  ParseFailure,
  AnswerNotInAnswerSet,
  TripleNotEntailed,
  SeedNotInFullSubgraph,
  QueryUnsupported,
  QueryExecutionError,
  TreeConstraintViolation,
  StaleFact,
  AnswerabilityFailed,
  Duplicate,
};

inline const char* to_string(RejectionReason r) {
  switch (r) {
    case RejectionReason::ParseFailure: return "ParseFailure";
    case RejectionReason::AnswerNotInAnswerSet: return "AnswerNotInAnswerSet";
    case RejectionReason::TripleNotEntailed: return "TripleNotEntailed";
    case RejectionReason::SeedNotInFullSubgraph: return "SeedNotInFullSubgraph";
    case RejectionReason::QueryUnsupported: return "QueryUnsupported";
    case RejectionReason::QueryExecutionError: return "QueryExecutionError";
    case RejectionReason::TreeConstraintViolation: return "TreeConstraintViolation";
    case RejectionReason::StaleFact: return "StaleFact";
    case RejectionReason::AnswerabilityFailed: return "AnswerabilityFailed";
    case RejectionReason::Duplicate: return "Duplicate";
  }
  return "Unknown";
}

struct Rejection {
  RejectionReason reason;
  std::string detail;
  std::size_t candidate = 0;
};

using prompts::CandidateProposal;

struct ValidationOptions {
  std::string kg_name = "wikidata";
  bool structural_filters = true;  // tree constraints on the GT subgraph
  bool enforce_k = false;          // require |GT| = k_requested
  bool analyze_redundancy = true;
};

using ValidationResult = std::variant<Datapoint, Rejection>;

/// Executes the proposal's query on `kg` and checks it against the proposed
/// answer, GT triples and seeds; enriches accepted candidates with shape,
/// hop and redundancy fields. The record id is left empty.
inline ValidationResult validate_candidate(const KnowledgeGraph& kg, const CandidateProposal& p,
                                           const ValidationOptions& opt = {}) {
  auto reject = [](RejectionReason r, std::string d) -> ValidationResult { return Rejection{r, std::move(d)}; };
  sparql::QueryAst ast;
  try {
    ast = sparql::parse_query(p.sparql_text);
  } catch (const UnsupportedFeature& e) {
    return reject(RejectionReason::QueryUnsupported, e.what());
  } catch (const ParseError& e) {
    return reject(RejectionReason::QueryUnsupported, e.what());
  }
  if (ast.form != sparql::QueryForm::Select) return reject(RejectionReason::QueryUnsupported, "query is not a SELECT");
  EntitySet answers;
  TripleSet full;
  try {
    answers = sparql::eval_select(kg, ast);
    full = sparql::eval_construct(kg, sparql::to_construct(ast));
  } catch (const QueryError& e) {
    return reject(RejectionReason::QueryExecutionError, e.what());
  }
  if (!answers.count(p.answer.id))
    return reject(RejectionReason::AnswerNotInAnswerSet,
                  p.answer.id.str() + " is not among the " + std::to_string(answers.size()) + " query answers");
  for (const auto& t : p.gt_triples) {
    if (!full.count(t.triple()))
      return reject(RejectionReason::TripleNotEntailed, "(" + t.head.id.str() + ", " + t.relation.id.str() + ", " +
                                                            t.tail.id.str() + ") is not in the full answer subgraph");
  }
  const auto full_nodes = nodes_of(full);
  for (const auto& s : p.seeds)
    if (!full_nodes.count(s.id))
      return reject(RejectionReason::SeedNotInFullSubgraph, s.id.str() + " is not a node of the full answer subgraph");

  Datapoint dp;
  dp.question = p.question;
  dp.paraphrased_question = p.question;
  std::set<EntityId> seen_seeds;
  for (const auto& s : p.seeds)
    if (seen_seeds.insert(s.id).second) dp.seed_entities.push_back(s);
  dp.answer_node = p.answer;
  TripleSet seen_gt;
  for (const auto& t : p.gt_triples)
    if (seen_gt.insert(t.triple()).second) dp.answer_subgraph.push_back(t);
  dp.sparql_query = p.sparql_text;
  const AnswerTree tree = dp.tree();
  if (opt.enforce_k && dp.answer_subgraph.size() != p.k_requested)
    return reject(RejectionReason::TreeConstraintViolation, "expected " + std::to_string(p.k_requested) +
                                                                " GT triples, got " +
                                                                std::to_string(dp.answer_subgraph.size()));
  const auto violations = check_tree_constraints(tree);
  if (opt.structural_filters && !violations.empty()) {
    std::string d;
    for (const auto& v : violations) d += std::string(d.empty() ? "" : "; ") + to_string(v.kind) + ": " + v.detail;
    return reject(RejectionReason::TreeConstraintViolation, d);
  }
  auto& k = dp.kgs[opt.kg_name];
  k.all_answers.assign(answers.begin(), answers.end());
  k.full_answer_subgraph.assign(full.begin(), full.end());
  if (violations.empty()) {
    dp.graph_isomorphism = isomorphism_code(tree);
    dp.n_hops = n_hops(tree);
    dp.minimal_graph_isomorphism = dp.graph_isomorphism;
    if (opt.analyze_redundancy) {
      auto rep = analyze_redundancy(kg, tree, answers);
      dp.redundant = rep.redundant;
      if (rep.redundant) {
        dp.minimal_graph_isomorphism = rep.minimal_isomorphism;
        dp.minimal_seeds_and_queries = rep.minimal_queries;
      }
    }
  }
  return dp;
}

/// Keep iff every GT triple is still present in the newer snapshot.
inline bool filter_stale(const Datapoint& dp, const KnowledgeGraph& kg_current) {
  return std::all_of(dp.answer_subgraph.begin(), dp.answer_subgraph.end(),
                     [&](const LabeledTriple& t) { return kg_current.contains(t.triple()); });
}

/// Case-folded, whitespace-collapsed question text.
inline std::string dedup_key(std::string_view question) {
  std::string out;
  bool space = false;
  for (unsigned char c : question) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

struct PipelineConfig {
  SamplerConfig sampler;                          // rng_seed here is ignored; see rng_seed below
  std::vector<double> k_weights{1, 1, 1, 1, 1, 1};  // weight of k = 1, 2, ...
  std::uint64_t rng_seed = 0;
  std::size_t candidate_budget = 100;
  unsigned workers = 1;
  std::vector<prompts::FewShot> few_shots;
  std::size_t few_shot_limit = 3;
  ValidationOptions validation;
  bool paraphrase = true;
  bool judge = false;
  unsigned judge_tries = 2;
  double generation_temperature = 0.0;
  std::size_t first_id = 0;
};

/// Everything needed to issue candidate `index`, derived from the run seed
/// alone.
struct CandidatePlan {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  unsigned k = 1;
  EntityId start;
  std::vector<Triple> seed_graph;
  std::vector<llm::ChatMessage> messages;
};

inline CandidatePlan plan_candidate(const KnowledgeGraph& kg, const PipelineConfig& cfg, std::size_t index) {
  if (cfg.k_weights.empty()) throw ArgumentError("k distribution is empty");
  CandidatePlan plan;
  plan.index = index;
  plan.seed = splitmix64(cfg.rng_seed + index);
  Rng rng(plan.seed);
  plan.k = static_cast<unsigned>(choose_weighted(rng, cfg.k_weights)) + 1;
  std::vector<NodeIndex> starts;
  for (NodeIndex n = 0; n < kg.num_entities(); ++n)
    if (kg.degree(n) > 0) starts.push_back(n);
  if (starts.empty()) throw ArgumentError("graph has no edges to sample from");
  const NodeIndex start = starts[rng() % starts.size()];
  plan.start = kg.entity(start);
  SamplerConfig sc = cfg.sampler;
  sc.rng_seed = rng();
  auto sample = sample_seed_graph(kg, start, sc);
  auto triples = sample.triples(kg);
  std::sort(triples.begin(), triples.end());
  plan.seed_graph = triples;
  plan.messages = prompts::build_generation_prompt(prompts::serialize_graph(triples, kg), plan.k,
                                                   prompts::select_few_shots(cfg.few_shots, plan.k, cfg.few_shot_limit));
  return plan;
}

/// The request the gateway will issue for a plan (used to script replays).
inline llm::ChatRequest candidate_request(const llm::Gateway& gw, const CandidatePlan& plan, const PipelineConfig& cfg) {
  return llm::ChatRequest{gw.config().model, plan.messages, cfg.generation_temperature, 0};
}

/// Samples, prompts and parses one candidate. Throws FormatError when the
/// reply does not parse.
inline CandidateProposal generate_candidate(const KnowledgeGraph& kg, const PipelineConfig& cfg, std::size_t index,
                                            llm::Gateway& gw) {
  const auto plan = plan_candidate(kg, cfg, index);
  auto reply = gw.send(plan.messages, 0, cfg.generation_temperature).content;
  return prompts::parse_proposal(reply, plan.k);
}

struct CandidateOutcome {
  std::optional<Datapoint> datapoint;
  std::optional<Rejection> rejection;
  std::vector<std::string> warnings;
};

inline CandidateOutcome run_candidate(const KnowledgeGraph& kg, const PipelineConfig& cfg, std::size_t index,
                                      llm::Gateway& gw, const KnowledgeGraph* kg_current,
                                      llm::Gateway* paraphraser = nullptr) {
  CandidateOutcome out;
  auto reject = [&](RejectionReason r, std::string d) {
    out.rejection = Rejection{r, std::move(d), index};
    return out;
  };
  CandidateProposal p;
  try {
    p = generate_candidate(kg, cfg, index, gw);
  } catch (const FormatError& e) {
    return reject(RejectionReason::ParseFailure, e.what());
  }
  auto v = validate_candidate(kg, p, cfg.validation);
  if (auto* r = std::get_if<Rejection>(&v)) return reject(r->reason, r->detail);
  Datapoint dp = std::get<Datapoint>(std::move(v));
  if (kg_current && !filter_stale(dp, *kg_current))
    return reject(RejectionReason::StaleFact, "a GT triple is missing from the current snapshot");
  if (cfg.judge) {
    std::vector<std::string> gold{dp.answer_node.label.empty() ? dp.answer_node.id.str() : dp.answer_node.label};
    auto j = prompts::judge_answerability(gw, dp.question, dp.answer_subgraph, gold, cfg.judge_tries);
    if (!j.answerable)
      return reject(RejectionReason::AnswerabilityFailed,
                    "judge failed on " + std::to_string(std::count(j.hits.begin(), j.hits.end(), false)) + " of " +
                        std::to_string(j.hits.size()) + " tries");
  }
  if (cfg.paraphrase) {
    try {
      dp.paraphrased_question = prompts::paraphrase(paraphraser ? *paraphraser : gw, dp.question);
    } catch (const Error& e) {
      out.warnings.push_back("candidate " + std::to_string(index) + ": paraphrase failed, keeping the question: " + e.what());
    }
  }
  out.datapoint = std::move(dp);
  return out;
}

struct PipelineResult {
  std::vector<Datapoint> accepted;
  std::vector<Rejection> rejections;
  std::size_t attempted = 0;
  std::vector<std::string> warnings;
  bool budget_exhausted = false;
};

/// Runs candidates until `target` are accepted or the budget is spent.
/// Candidates run in waves of `workers`; results are committed in candidate
/// order, so output does not depend on scheduling. `paraphraser`
/// defaults to `gw`. Gateway failures other
/// than paraphrasing abort the run.
inline PipelineResult run_pipeline(const KnowledgeGraph& kg, const PipelineConfig& cfg, llm::Gateway& gw,
                                   std::size_t target, const KnowledgeGraph* kg_current = nullptr,
                                   llm::Gateway* paraphraser = nullptr) {
  PipelineResult res;
  if (target == 0) return res;
  std::set<std::string> questions;
  const std::size_t workers = std::max(1u, cfg.workers);
  std::size_t next = 0;
  while (res.accepted.size() < target && next < cfg.candidate_budget) {
    const std::size_t wave = std::min({workers, cfg.candidate_budget - next, target - res.accepted.size()});
    std::vector<CandidateOutcome> outcomes(wave);
    if (wave == 1) {
      outcomes[0] = run_candidate(kg, cfg, next, gw, kg_current, paraphraser);
    } else {
      std::vector<std::future<CandidateOutcome>> futures;
      for (std::size_t i = 0; i < wave; ++i)
        futures.push_back(std::async(std::launch::async, [&, idx = next + i] { return run_candidate(kg, cfg, idx, gw, kg_current, paraphraser); }));
      for (std::size_t i = 0; i < wave; ++i) outcomes[i] = futures[i].get();
    }
    for (std::size_t i = 0; i < wave; ++i) {
      auto& o = outcomes[i];
      const std::size_t idx = next + i;
      res.warnings.insert(res.warnings.end(), o.warnings.begin(), o.warnings.end());
      if (res.accepted.size() >= target) break;
      ++res.attempted;
      if (o.rejection) {
        res.rejections.push_back(*o.rejection);
        continue;
      }
      auto& dp = *o.datapoint;
      if (!questions.insert(dedup_key(dp.question)).second) {
        res.rejections.push_back({RejectionReason::Duplicate, "question already accepted: " + dp.question, idx});
        continue;
      }
      dp.id = std::to_string(cfg.first_id + res.accepted.size());
      res.accepted.push_back(std::move(dp));
    }
    next += wave;
  }
  if (res.accepted.size() < target) {
    res.budget_exhausted = true;
    res.warnings.push_back("candidate budget exhausted: accepted " + std::to_string(res.accepted.size()) + " of " +
                           std::to_string(target));
  }
  return res;
}

inline nlohmann::ordered_json to_json(const Rejection& r) {
  nlohmann::ordered_json j;
  j["candidate"] = r.candidate;
  j["reason"] = to_string(r.reason);
  j["detail"] = r.detail;
  return j;
}

}  // namespace synthkgqa::pipeline
