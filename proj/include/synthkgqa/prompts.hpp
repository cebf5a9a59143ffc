#pragma once

// Prompt construction and reply parsing for generation, paraphrasing and
// answerability judging.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/evalkit.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/kg.hpp"
#include "synthkgqa/llm.hpp"

namespace synthkgqa::prompts {

struct CandidateProposal {
  std::string question;
  std::vector<LabeledEntity> seeds;
  LabeledEntity answer;
  std::vector<LabeledTriple> gt_triples;
  std::string sparql_text;
  unsigned k_requested = 0;

  friend bool operator==(const CandidateProposal&, const CandidateProposal&) = default;
};

inline std::string format_triple(const LabeledTriple& t) {
  return format_labeled(t.head) + "-" + format_labeled(t.relation) + "-" + format_labeled(t.tail);
}

/// Looks up labels in `kg`; every id needs an explicit label.
inline LabeledTriple label_triple(const KnowledgeGraph& kg, const Triple& t) {
  for (const auto& e : {t.head, t.tail})
    if (!kg.has_explicit_label(e)) throw ArgumentError("no label for entity " + e.str());
  if (!kg.has_explicit_label(t.relation)) throw ArgumentError("no label for relation " + t.relation.str());
  return {{t.head, kg.entity_label(t.head)}, {t.relation, kg.relation_label(t.relation)}, {t.tail, kg.entity_label(t.tail)}};
}

/// "Label (ID)-label (PID)-Label (ID)" entries joined by ';', in the
/// order given.
inline std::string serialize_graph(const std::vector<Triple>& triples, const KnowledgeGraph& kg) {
  std::string out;
  for (const auto& t : triples) {
    if (!out.empty()) out += ';';
    out += format_triple(label_triple(kg, t));
  }
  return out;
}

inline std::string serialize_graph(const TripleSet& triples, const KnowledgeGraph& kg) {
  return serialize_graph(std::vector<Triple>(triples.begin(), triples.end()), kg);
}

struct FewShot {
  unsigned k = 0;
  std::string isomorphism;
  std::string graph;  // serialized graph
  std::string reply;  // assistant reply in the proposal layout
};

inline std::vector<FewShot> load_few_shots(std::istream& in) {
  std::vector<FewShot> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("k").get<unsigned>(), j.at("isomorphism").get<std::string>(), j.at("graph").get<std::string>(),
                     j.at("reply").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("few-shot line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<FewShot> load_few_shots(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open few-shot file " + path.string());
  return load_few_shots(in);
}

/// At most `limit` exemplars, one per isomorphism code, closest in k to
/// the request first (ties: smaller k, then code).
inline std::vector<FewShot> select_few_shots(const std::vector<FewShot>& bank, unsigned k, std::size_t limit = 3) {
  std::vector<const FewShot*> order;
  for (const auto& s : bank) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [&](const FewShot* a, const FewShot* b) {
    const auto da = a->k > k ? a->k - k : k - a->k, db = b->k > k ? b->k - k : k - b->k;
    if (da != db) return da < db;
    if (a->k != b->k) return a->k < b->k;
    return a->isomorphism < b->isomorphism;
  });
  std::vector<FewShot> out;
  std::set<std::string> codes;
  for (const auto* s : order) {
    if (out.size() >= limit) break;
    if (codes.insert(s->isomorphism).second) out.push_back(*s);
  }
  return out;
}

inline constexpr std::string_view kQuestionLabel = "Question:";
inline constexpr std::string_view kSeedsLabel = "Nodes mentioned in the question:";
inline constexpr std::string_view kAnswerLabel = "Answer:";
inline constexpr std::string_view kTriplesLabel = "Triples used:";
inline constexpr std::string_view kSparqlLabel = "SPARQL query:";

inline std::string generation_instruction(unsigned k) {
  const std::string n = std::to_string(k);
  return "You will receive a list of knowledge graph triples. Write one question that can only be answered by "
         "combining exactly " + n + " of the provided triples. All " + n +
         " triples must be necessary, and together they must involve more than one entity. The answer must be a "
         "single node of the graph, with no ambiguity.\n"
         "Reply with exactly these five fields, in this order:\n"
         "Question: <the question>\n"
         "Nodes mentioned in the question: <entities named in the question as Label (ID), separated by ';'>\n"
         "Answer: <the answer node as Label (ID)>\n"
         "Triples used: <the triples you used, separated by ';', written as in the input>\n"
         "SPARQL query: <a Wikidata SPARQL query returning every answer in ?answer>";
}

inline std::vector<llm::ChatMessage> build_generation_prompt(const std::string& graph, unsigned k,
                                                            const std::vector<FewShot>& few_shots) {
  if (k == 0) throw ArgumentError("k must be at least 1");
  std::vector<llm::ChatMessage> out;
  out.push_back({"user", generation_instruction(k)});
  for (const auto& s : few_shots) {
    out.push_back({"user", "Graph: " + s.graph});
    out.push_back({"assistant", s.reply});
  }
  out.push_back({"user", "Graph: " + graph});
  return out;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string section_text(std::string_view s) {
  std::string t = trim(s);
  if (!t.empty() && t.back() == ',') t = trim(std::string_view(t).substr(0, t.size() - 1));
  return t;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(';', start);
    if (end == std::string::npos) end = s.size();
    auto item = section_text(std::string_view(s).substr(start, end - start));
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

inline LabeledEntity entity(const std::string& text, std::string_view section) {
  std::string label, id;
  if (!split_labeled(text, label, id)) throw FormatError(std::string(section) + " entry without an id: " + text);
  return {EntityId(id), label};
}

inline std::string strip_fences(std::string s) {
  s = trim(s);
  if (s.rfind("```", 0) == 0) {
    auto nl = s.find('\n');
    s = nl == std::string::npos ? "" : s.substr(nl + 1);
  }
  if (s.size() >= 3 && s.compare(s.size() - 3, 3, "```") == 0) s.resize(s.size() - 3);
  return trim(s);
}

}  // namespace detail

/// Splits "H (ID)-r (PID)-T (ID)" on the first two "(id)-" anchors, so
/// hyphens inside labels are harmless.
inline LabeledTriple parse_triple(const std::string& text) {
  static const std::regex anchor(R"(\(([^()\s]+)\)\s*-\s*)");
  std::vector<std::smatch> hits;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), anchor); it != std::sregex_iterator() && hits.size() < 2; ++it)
    hits.push_back(*it);
  if (hits.size() < 2) throw FormatError("triple without head and relation ids: " + text);
  auto end_of_id = [](const std::smatch& m) {
    return static_cast<std::size_t>(m.position(0)) + m[1].length() + 2;  // through ')'
  };
  const std::size_t h_end = end_of_id(hits[0]), r_begin = hits[0].position(0) + hits[0].length(0);
  const std::size_t r_end = end_of_id(hits[1]), t_begin = hits[1].position(0) + hits[1].length(0);
  auto head = detail::entity(detail::trim(text.substr(0, h_end)), kTriplesLabel);
  std::string rl, rid;
  if (!split_labeled(detail::trim(text.substr(r_begin, r_end - r_begin)), rl, rid))
    throw FormatError("triple without relation id: " + text);
  auto tail = detail::entity(detail::trim(text.substr(t_begin)), kTriplesLabel);
  return {head, {RelationId(rid), rl}, tail};
}

inline CandidateProposal parse_proposal(const std::string& reply, unsigned k_requested = 0) {
  const std::string_view labels[] = {kQuestionLabel, kSeedsLabel, kAnswerLabel, kTriplesLabel, kSparqlLabel};
  std::size_t pos[5];
  std::size_t from = 0;
  for (int i = 0; i < 5; ++i) {
    pos[i] = reply.find(labels[i], from);
    if (pos[i] == std::string::npos) throw FormatError("reply has no '" + std::string(labels[i]) + "' section");
    from = pos[i] + labels[i].size();
  }
  auto body = [&](int i) {
    const std::size_t b = pos[i] + labels[i].size();
    const std::size_t e = i + 1 < 5 ? pos[i + 1] : reply.size();
    return std::string_view(reply).substr(b, e - b);
  };
  CandidateProposal p;
  p.k_requested = k_requested;
  p.question = detail::section_text(body(0));
  if (p.question.empty()) throw FormatError("empty 'Question:' section");
  for (const auto& s : detail::split_list(detail::section_text(body(1)))) p.seeds.push_back(detail::entity(s, kSeedsLabel));
  if (p.seeds.empty()) throw FormatError("empty 'Nodes mentioned in the question:' section");
  p.answer = detail::entity(detail::section_text(body(2)), kAnswerLabel);
  for (const auto& t : detail::split_list(detail::section_text(body(3)))) p.gt_triples.push_back(parse_triple(t));
  if (p.gt_triples.empty()) throw FormatError("empty 'Triples used:' section");
  p.sparql_text = detail::strip_fences(std::string(body(4)));
  if (p.sparql_text.empty()) throw FormatError("empty 'SPARQL query:' section");
  return p;
}

/// Reply text in the layout parse_proposal reads.
inline std::string format_proposal(const CandidateProposal& p) {
  std::string out;
  out += std::string(kQuestionLabel) + " " + p.question + "\n";
  out += std::string(kSeedsLabel) + " ";
  for (std::size_t i = 0; i < p.seeds.size(); ++i) out += (i ? "; " : "") + format_labeled(p.seeds[i]);
  out += "\n" + std::string(kAnswerLabel) + " " + format_labeled(p.answer) + "\n";
  out += std::string(kTriplesLabel) + " ";
  for (std::size_t i = 0; i < p.gt_triples.size(); ++i) out += (i ? "; " : "") + format_triple(p.gt_triples[i]);
  out += "\n" + std::string(kSparqlLabel) + " " + p.sparql_text + "\n";
  return out;
}

inline std::vector<llm::ChatMessage> paraphrase_prompt(const std::string& question) {
  return {{"user",
           "Rewrite the following question so it reads like something a person would naturally ask. Keep its "
           "meaning and every entity it names. Reply with the rewritten question only.\n\n" +
               question}};
}

/// Rewritten question; the caller keeps the original alongside.
inline std::string paraphrase(llm::Gateway& gw, const std::string& question) {
  auto reply = detail::trim(gw.send(paraphrase_prompt(question)).content);
  if (reply.empty()) throw GatewayError("empty paraphrase reply");
  return reply;
}

inline std::vector<llm::ChatMessage> judge_prompt(const std::string& question, const std::vector<LabeledTriple>& facts) {
  std::string text = "Facts:\n";
  for (const auto& t : facts) text += format_triple(t) + "\n";
  text += "\nUsing only these facts, answer the question below. Reply with the answer's name only.\n\nQuestion: " + question;
  return {{"user", text}};
}

struct Judgment {
  bool answerable = false;
  std::vector<std::string> transcript;  // one reply per try
  std::vector<bool> hits;
};

/// Asks `tries` independent times; answerable iff every reply contains a
/// gold label under exact-match normalization.
inline Judgment judge_answerability(llm::Gateway& gw, const std::string& question, const std::vector<LabeledTriple>& facts,
                                    const std::vector<std::string>& gold_labels, unsigned tries = 2) {
  if (tries == 0) throw ArgumentError("tries must be at least 1");
  const auto messages = judge_prompt(question, facts);
  Judgment j;
  j.answerable = true;
  for (unsigned i = 0; i < tries; ++i) {
    auto reply = gw.send(messages, i, 0.0).content;
    const bool hit = eval::em_scores(reply, gold_labels).hit > 0.0;
    j.transcript.push_back(std::move(reply));
    j.hits.push_back(hit);
    j.answerable = j.answerable && hit;
  }
  return j;
}

}  // namespace synthkgqa::prompts
