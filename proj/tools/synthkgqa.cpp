// Command-line front end: one subcommand per dataset tooling step.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "synthkgqa/http_httplib.hpp"
#include "synthkgqa/synthkgqa.hpp"

namespace sk = synthkgqa;
using Json = nlohmann::ordered_json;

namespace {

struct KgArgs {
  std::string triples;
  std::string entity_labels;
  std::string relation_labels;

  void add(CLI::App* cmd, bool required = true) {
    auto* o = cmd->add_option("--kg", triples, "Triples file (head<TAB>relation<TAB>tail)");
    if (required) o->required();
    cmd->add_option("--entity-labels", entity_labels, "Entity label file (id<TAB>label)");
    cmd->add_option("--relation-labels", relation_labels, "Relation label file (id<TAB>label)");
  }

  sk::KnowledgeGraph load() const {
    auto opt = [](const std::string& s) -> std::optional<std::filesystem::path> {
      if (s.empty()) return std::nullopt;
      return std::filesystem::path(s);
    };
    return sk::KnowledgeGraph::load_files(triples, opt(entity_labels), opt(relation_labels));
  }
};

/// Output file or stdout for "" / "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw sk::ArgumentError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<sk::Datapoint> read_input(const std::string& path) {
  if (path.empty() || path == "-") return sk::records::read_records(std::cin);
  return sk::records::read_records(std::filesystem::path(path));
}

Json triple_json(const sk::Triple& t) { return Json::array({t.head.str(), t.relation.str(), t.tail.str()}); }

void info(const Json& j) { std::cerr << j.dump() << '\n'; }

sk::config::Config load_config(const std::string& path) {
  if (path.empty()) return {};
  return sk::config::load_config(path);
}

// ---- subcommands ----

struct GenerateArgs {
  KgArgs kg;
  std::string config, out, rejections, replay, record, few_shots, kg_current;
  std::size_t target = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<unsigned> workers;
  bool no_paraphrase = false, judge = false;
};

int run_generate(const GenerateArgs& a) {
  auto cfg = load_config(a.config);
  auto& pc = cfg.pipeline;
  if (a.seed) pc.rng_seed = *a.seed;
  if (a.budget) pc.candidate_budget = *a.budget;
  if (a.workers) pc.workers = *a.workers;
  if (a.no_paraphrase) pc.paraphrase = false;
  if (a.judge) pc.judge = true;
  if (!a.replay.empty()) cfg.replay_file = a.replay;
  if (!a.few_shots.empty()) cfg.few_shots_file = a.few_shots;
  if (!cfg.few_shots_file.empty()) pc.few_shots = sk::prompts::load_few_shots(std::filesystem::path(cfg.few_shots_file));

  Output out(a.out);
  if (a.target == 0) {
    info({{"accepted", 0}, {"rejected", 0}, {"attempted", 0}});
    return 0;
  }
  const auto kg = a.kg.load();
  std::optional<sk::KnowledgeGraph> current;
  if (!a.kg_current.empty()) current = sk::KnowledgeGraph::load_files(a.kg_current);

  std::shared_ptr<sk::llm::ChatProvider> provider;
  if (!cfg.replay_file.empty())
    provider = std::make_shared<sk::llm::ReplayProvider>(sk::llm::ReplayProvider::load(std::filesystem::path(cfg.replay_file)));
  else
    provider = std::make_shared<sk::llm::OpenAiProvider>(cfg.provider, std::make_shared<sk::net::HttplibTransport>());
  std::shared_ptr<sk::llm::RecordingProvider> recorder;
  if (!a.record.empty()) provider = recorder = std::make_shared<sk::llm::RecordingProvider>(provider);

  sk::llm::Gateway gw(provider, cfg.provider);
  std::optional<sk::llm::Gateway> para;
  if (cfg.paraphrase_model) {
    auto pcfg = cfg.provider;
    pcfg.model = *cfg.paraphrase_model;
    para.emplace(provider, pcfg);
  }
  auto res = sk::pipeline::run_pipeline(kg, pc, gw, a.target, current ? &*current : nullptr, para ? &*para : nullptr);
  sk::records::write_records(out.stream(), res.accepted);
  if (!a.rejections.empty()) {
    Output rej(a.rejections);
    for (const auto& r : res.rejections) rej.stream() << sk::pipeline::to_json(r).dump() << '\n';
  }
  if (recorder) {
    std::ofstream rec(a.record);
    if (!rec) throw sk::ArgumentError("cannot write " + a.record);
    recorder->write(rec);
  }
  Json reasons = Json::object();
  for (const auto& r : res.rejections) {
    auto key = sk::pipeline::to_string(r.reason);
    reasons[key] = reasons.value(key, 0) + 1;
  }
  info({{"accepted", res.accepted.size()},
        {"rejected", res.rejections.size()},
        {"attempted", res.attempted},
        {"rejections_by_reason", reasons},
        {"warnings", res.warnings}});
  return 0;
}

struct RecordsArgs {
  KgArgs kg;
  std::string in, out, kg_name = "wikidata";
};

sk::prompts::CandidateProposal proposal_of(const sk::Datapoint& dp) {
  sk::prompts::CandidateProposal p;
  p.question = dp.question;
  p.seeds = dp.seed_entities;
  p.answer = dp.answer_node;
  p.gt_triples = dp.answer_subgraph;
  p.sparql_text = dp.sparql_query;
  p.k_requested = static_cast<unsigned>(dp.answer_subgraph.size());
  return p;
}

int run_validate(const RecordsArgs& a, const std::string& rejections, const std::string& kg_current) {
  const auto kg = a.kg.load();
  std::optional<sk::KnowledgeGraph> current;
  if (!kg_current.empty()) current = sk::KnowledgeGraph::load_files(kg_current);
  auto records = read_input(a.in);
  sk::pipeline::ValidationOptions opt;
  opt.kg_name = a.kg_name;
  std::vector<sk::Datapoint> ok;
  std::vector<Json> rejected;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& dp = records[i];
    auto v = sk::pipeline::validate_candidate(kg, proposal_of(dp), opt);
    if (auto* r = std::get_if<sk::pipeline::Rejection>(&v)) {
      rejected.push_back({{"id", dp.id}, {"reason", sk::pipeline::to_string(r->reason)}, {"detail", r->detail}});
      continue;
    }
    auto fresh = std::get<sk::Datapoint>(std::move(v));
    if (current && !sk::pipeline::filter_stale(fresh, *current)) {
      rejected.push_back({{"id", dp.id}, {"reason", "StaleFact"}, {"detail", "a GT triple is missing from the current snapshot"}});
      continue;
    }
    auto merged = dp;
    merged.kgs[a.kg_name] = fresh.kgs[a.kg_name];
    merged.graph_isomorphism = fresh.graph_isomorphism;
    merged.n_hops = fresh.n_hops;
    merged.redundant = fresh.redundant;
    merged.minimal_graph_isomorphism = fresh.minimal_graph_isomorphism;
    merged.minimal_seeds_and_queries = fresh.minimal_seeds_and_queries;
    ok.push_back(std::move(merged));
  }
  Output out(a.out);
  sk::records::write_records(out.stream(), ok);
  if (!rejections.empty()) {
    Output rej(rejections);
    for (const auto& r : rejected) rej.stream() << r.dump() << '\n';
  }
  info({{"valid", ok.size()}, {"rejected", rejected.size()}});
  return 0;
}

int run_classify(const RecordsArgs& a) {
  auto records = read_input(a.in);
  std::size_t invalid = 0;
  for (auto& dp : records) {
    const auto tree = dp.tree();
    const auto v = sk::check_tree_constraints(tree);
    if (!v.empty()) {
      ++invalid;
      info({{"id", dp.id}, {"warning", std::string("not a valid answer tree: ") + sk::to_string(v.front().kind)}});
      continue;
    }
    dp.graph_isomorphism = sk::isomorphism_code(tree);
    dp.n_hops = sk::n_hops(tree);
    if (!dp.redundant) dp.minimal_graph_isomorphism = dp.graph_isomorphism;
  }
  Output out(a.out);
  sk::records::write_records(out.stream(), records);
  info({{"classified", records.size() - invalid}, {"invalid", invalid}});
  return 0;
}

int run_redundancy(const RecordsArgs& a) {
  const auto kg = a.kg.load();
  auto records = read_input(a.in);
  std::size_t redundant = 0;
  for (auto& dp : records) {
    auto answers = dp.answers(a.kg_name);
    if (!dp.find_kg(a.kg_name)) answers = sk::sparql::eval_select(kg, sk::sparql::parse_query(dp.sparql_query));
    const auto rep = sk::analyze_redundancy(kg, dp.tree(), answers);
    dp.redundant = rep.redundant;
    dp.minimal_seeds_and_queries = rep.minimal_queries;
    dp.minimal_graph_isomorphism = rep.redundant ? rep.minimal_isomorphism : sk::isomorphism_code(dp.tree());
    redundant += rep.redundant;
  }
  Output out(a.out);
  sk::records::write_records(out.stream(), records);
  info({{"records", records.size()}, {"redundant", redundant}});
  return 0;
}

struct RetrievalArgs {
  RecordsArgs r;
  std::string config;
  std::optional<unsigned> hop_depth;
  std::optional<std::size_t> top_nodes, edge_cap;
  bool no_confounders = false;
};

int run_build_retrieval(RetrievalArgs a) {
  auto cfg = load_config(a.config).retrieval;
  if (a.hop_depth) cfg.hop_depth = *a.hop_depth;
  if (a.top_nodes) cfg.top_nodes = *a.top_nodes;
  if (a.edge_cap) cfg.edge_cap = *a.edge_cap;
  if (a.no_confounders) cfg.add_confounders = false;
  cfg.kg_name = a.r.kg_name;
  const auto kg = a.r.kg.load();
  const auto records = read_input(a.r.in);
  Output out(a.r.out);
  for (const auto& dp : records) {
    const auto g = sk::analysis::build_retrieval_graph(kg, dp, cfg);
    Json edges = Json::array();
    for (const auto& e : g.edges)
      edges.push_back(Json::array({e.triple.head.str(), e.triple.relation.str(), e.triple.tail.str(), sk::analysis::to_string(e.origin)}));
    Json j;
    j["question_id"] = g.question_id;
    j["hop_depth"] = g.hop_depth;
    j["neighborhood_nodes"] = g.neighborhood_nodes;
    j["neighborhood_edges"] = g.neighborhood_edges;
    j["confounders_truncated"] = g.confounders_truncated;
    j["edges"] = edges;
    out.stream() << j.dump() << '\n';
  }
  info({{"graphs", records.size()}});
  return 0;
}

int run_analyze_paths(const RecordsArgs& a, bool directed, const std::string& summary_path) {
  const auto kg = a.kg.load();
  const auto records = read_input(a.in);
  Output out(a.out);
  double gt_in_sp = 0, sp_in_gt = 0, gt_n = 0, sp_n = 0;
  std::size_t pairs = 0, shortcuts = 0, parallel = 0;
  for (const auto& dp : records) {
    const auto st = sk::analysis::sp_gt_overlap(kg, dp, a.kg_name, directed);
    Json seeds = Json::array();
    for (const auto& s : st.seeds) {
      Json js;
      js["seed"] = s.seed.str();
      js["gt_path_length"] = s.gt_path_length;
      js["sp_length"] = s.sp_length ? Json(*s.sp_length) : Json(nullptr);
      js["shortcut"] = s.shortcut;
      js["parallel_path_count"] = s.parallel_path_count;
      seeds.push_back(js);
      ++pairs;
      shortcuts += s.shortcut;
      parallel += s.parallel_path_count > 1.0;
    }
    Json j;
    j["question_id"] = st.question_id;
    j["pct_gt_in_sp"] = st.pct_gt_in_sp;
    j["pct_sp_in_gt"] = st.pct_sp_in_gt;
    j["n_gt_triples"] = st.n_gt_triples;
    j["n_sp_triples"] = st.n_sp_triples;
    j["seeds"] = seeds;
    out.stream() << j.dump() << '\n';
    gt_in_sp += st.pct_gt_in_sp;
    sp_in_gt += st.pct_sp_in_gt;
    gt_n += static_cast<double>(st.n_gt_triples);
    sp_n += static_cast<double>(st.n_sp_triples);
  }
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  Json summary;
  summary["questions"] = records.size();
  summary["mean_pct_gt_in_sp"] = gt_in_sp / n;
  summary["mean_pct_sp_in_gt"] = sp_in_gt / n;
  summary["mean_gt_triples"] = gt_n / n;
  summary["mean_sp_triples"] = sp_n / n;
  summary["seed_answer_pairs"] = pairs;
  summary["pct_pairs_with_shortcut"] = pairs ? 100.0 * static_cast<double>(shortcuts) / static_cast<double>(pairs) : 0.0;
  summary["pct_pairs_with_parallel_paths"] = pairs ? 100.0 * static_cast<double>(parallel) / static_cast<double>(pairs) : 0.0;
  if (!summary_path.empty()) {
    Output s(summary_path);
    s.stream() << summary.dump(2) << '\n';
  } else {
    info(summary);
  }
  return 0;
}

int run_export_supervision(const RecordsArgs& a, const std::string& mode, bool directed, std::size_t max_paths) {
  sk::analysis::SupervisionMode m;
  if (mode == "gt") m = sk::analysis::SupervisionMode::GroundTruth;
  else if (mode == "sp") m = sk::analysis::SupervisionMode::ShortestPath;
  else throw sk::ConfigError("--mode must be gt or sp");
  std::optional<sk::KnowledgeGraph> kg;
  if (m == sk::analysis::SupervisionMode::ShortestPath) {
    if (a.kg.triples.empty()) throw sk::ConfigError("--mode sp needs --kg");
    kg = a.kg.load();
  }
  const sk::KnowledgeGraph empty;
  const auto records = read_input(a.in);
  Output out(a.out);
  for (const auto& dp : records) {
    const auto sup = sk::analysis::export_supervision(dp, kg ? *kg : empty, m, a.kg_name, directed, max_paths);
    Json paths = Json::array();
    for (const auto& p : sup.paths) {
      Json triples = Json::array();
      for (const auto& s : p.steps) triples.push_back(triple_json(s.triple));
      paths.push_back({{"seed", p.seed.str()}, {"answer", p.answer.str()}, {"relation_path", sk::analysis::relation_path(p.steps)},
                       {"triples", triples}});
    }
    Json j;
    j["question_id"] = sup.question_id;
    j["mode"] = mode;
    j["truncated"] = sup.truncated;
    j["paths"] = paths;
    out.stream() << j.dump() << '\n';
  }
  return 0;
}

struct SplitArgs {
  std::string in, train, test, report, config;
  std::optional<std::size_t> top_k, min_per_category, per_iso;
  std::vector<std::string> reserved;
  bool validate_only = false;
};

Json violations_json(const std::vector<sk::split::Violation>& v) {
  Json out = Json::array();
  for (const auto& x : v) out.push_back({{"constraint", x.constraint}, {"detail", x.detail}, {"ids", x.ids}});
  return out;
}

int run_split(const SplitArgs& a) {
  auto c = load_config(a.config).split;
  if (a.top_k) c.relation_train_top_k = *a.top_k;
  if (a.min_per_category) c.min_per_category = *a.min_per_category;
  if (a.per_iso) c.in_distribution_per_iso = *a.per_iso;
  for (const auto& r : a.reserved) c.reserved_test_iso_codes.insert(r);
  if (a.validate_only) {
    const auto train = sk::records::read_records(std::filesystem::path(a.train));
    const auto test = sk::records::read_records(std::filesystem::path(a.test));
    const auto v = sk::split::validate_split(train, test, c);
    Output rep(a.report);
    rep.stream() << Json({{"violations", violations_json(v)}}).dump(2) << '\n';
    return v.empty() ? 0 : 1;
  }
  if (a.in.empty() || a.train.empty() || a.test.empty()) throw sk::ConfigError("split needs --in, --train and --test");
  const auto pool = read_input(a.in);
  const auto res = sk::split::design_split(pool, c);
  sk::records::write_records(std::filesystem::path(a.train), res.train);
  sk::records::write_records(std::filesystem::path(a.test), res.test);
  Json dropped = Json::array();
  for (const auto& [id, why] : res.report.dropped) dropped.push_back({{"id", id}, {"reason", why}});
  Json rep;
  rep["train"] = res.train.size();
  rep["test"] = res.test.size();
  rep["dropped"] = dropped;
  rep["notes"] = res.report.notes;
  rep["iterations"] = res.report.iterations;
  rep["violations"] = violations_json(sk::split::validate_split(res.train, res.test, c));
  Output out(a.report);
  out.stream() << rep.dump(2) << '\n';
  return 0;
}

int run_stats(const std::string& in, const std::string& out_path, const std::string& kg_name) {
  const auto s = sk::split::dataset_stats(read_input(in), kg_name);
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["questions"] = s.questions;
  j["unique_relations"] = s.unique_relations;
  j["unique_entities"] = s.unique_entities;
  j["unique_iso_codes"] = s.unique_iso_codes;
  j["redundant"] = s.redundant;
  j["avg_seeds"] = opt(s.avg_seeds);
  j["avg_hops"] = opt(s.avg_hops);
  j["avg_answers"] = opt(s.avg_answers);
  j["avg_gt_edges"] = opt(s.avg_gt_edges);
  j["relation_counts"] = s.relation_counts;
  j["iso_counts"] = s.iso_counts;
  Output out(out_path);
  out.stream() << j.dump(2) << '\n';
  return 0;
}

struct EvaluateArgs {
  KgArgs kg;
  std::string dataset, results, baseline, out, per_question, group_by = "none", match = "exact", kg_name = "wikikg2";
  bool json = false;
};

std::vector<sk::eval::EvalRecord> score_file(const std::string& path, const std::map<std::string, const sk::Datapoint*>& by_id,
                                             const sk::eval::ScoreOptions& opt) {
  std::ifstream in(path);
  if (!in) throw sk::ArgumentError("cannot open " + path);
  std::vector<sk::eval::EvalRecord> out;
  std::vector<std::string> unknown;
  for (const auto& r : sk::eval::read_results(in)) {
    auto it = by_id.find(r.question_id);
    if (it == by_id.end()) {
      unknown.push_back(r.question_id);
      continue;
    }
    out.push_back(sk::eval::score_record(*it->second, r, opt));
  }
  if (!unknown.empty()) throw sk::JoinError(unknown);
  return out;
}

int run_evaluate(const EvaluateArgs& a) {
  const auto dataset = sk::records::read_records(std::filesystem::path(a.dataset));
  std::map<std::string, const sk::Datapoint*> by_id;
  for (const auto& dp : dataset) by_id[dp.id] = &dp;
  sk::eval::ScoreOptions opt;
  opt.kg_name = a.kg_name;
  if (a.match == "exact") opt.match = sk::eval::TripleMatch::Exact;
  else if (a.match == "inverse") opt.match = sk::eval::TripleMatch::InverseTolerant;
  else throw sk::ConfigError("--match must be exact or inverse");
  std::optional<sk::KnowledgeGraph> labels;
  if (!a.kg.triples.empty()) {
    labels = a.kg.load();
    opt.labels = &*labels;
  }
  const auto group = sk::eval::parse_group_by(a.group_by);
  const auto scored = score_file(a.results, by_id, opt);
  std::optional<std::vector<sk::eval::EvalRecord>> base;
  if (!a.baseline.empty()) base = score_file(a.baseline, by_id, opt);
  const auto report = sk::eval::aggregate_report(scored, dataset, group, base ? &*base : nullptr);
  Output out(a.out);
  if (a.json) out.stream() << sk::eval::to_json(report).dump(2) << '\n';
  else sk::eval::write_tsv(out.stream(), report);
  if (!a.per_question.empty()) {
    Output pq(a.per_question);
    for (const auto& r : scored) pq.stream() << sk::eval::to_json(r).dump() << '\n';
  }
  return 0;
}

void error_json(const std::string& kind, const std::string& message) {
  std::cerr << Json({{"error", kind}, {"message", message}}).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic KGQA dataset tooling"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample seed graphs, prompt the LLM and validate candidates");
  gen.kg.add(c_gen);
  c_gen->add_option("--config", gen.config, "JSON config file");
  c_gen->add_option("--target", gen.target, "Number of questions to accept")->required();
  c_gen->add_option("--out", gen.out, "Output records (JSONL, default stdout)");
  c_gen->add_option("--rejections", gen.rejections, "Rejection log (JSONL)");
  c_gen->add_option("--replay", gen.replay, "Replay file (digest -> reply)");
  c_gen->add_option("--record", gen.record, "Write every exchange to this replay file");
  c_gen->add_option("--few-shots", gen.few_shots, "Few-shot bank (JSONL)");
  c_gen->add_option("--kg-current", gen.kg_current, "Newer snapshot for the stale-fact filter");
  c_gen->add_option("--seed", gen.seed, "Run seed");
  c_gen->add_option("--budget", gen.budget, "Candidate budget");
  c_gen->add_option("--workers", gen.workers, "Parallel candidates")->check(CLI::PositiveNumber);
  c_gen->add_flag("--no-paraphrase", gen.no_paraphrase, "Skip paraphrasing");
  c_gen->add_flag("--judge", gen.judge, "Run the answerability judge");

  RecordsArgs val;
  std::string val_rejections, val_current;
  auto* c_val = app.add_subcommand("validate", "Re-run record queries on a KG and re-check every record");
  val.kg.add(c_val);
  c_val->add_option("--in", val.in, "Input records")->required();
  c_val->add_option("--out", val.out, "Valid records");
  c_val->add_option("--rejections", val_rejections, "Rejected record log");
  c_val->add_option("--kg-name", val.kg_name, "KG name for answer fields");
  c_val->add_option("--kg-current", val_current, "Newer snapshot for the stale-fact filter");

  RecordsArgs cls;
  auto* c_cls = app.add_subcommand("classify", "Recompute isomorphism codes and hop counts");
  c_cls->add_option("--in", cls.in, "Input records")->required();
  c_cls->add_option("--out", cls.out, "Output records");

  RecordsArgs red;
  auto* c_red = app.add_subcommand("redundancy", "Recompute redundancy fields");
  red.kg.add(c_red);
  c_red->add_option("--in", red.in, "Input records")->required();
  c_red->add_option("--out", red.out, "Output records");
  c_red->add_option("--kg-name", red.kg_name, "KG name whose answer set is used");

  RetrievalArgs ret;
  ret.r.kg_name = "wikikg2";
  auto* c_ret = app.add_subcommand("build-retrieval-graphs", "Build PPR-pruned question-specific graphs");
  ret.r.kg.add(c_ret);
  c_ret->add_option("--in", ret.r.in, "Input records")->required();
  c_ret->add_option("--out", ret.r.out, "Output graphs (JSONL)");
  c_ret->add_option("--kg-name", ret.r.kg_name, "KG name of the full answer subgraph");
  c_ret->add_option("--config", ret.config, "JSON config file");
  c_ret->add_option("--hop-depth", ret.hop_depth, "Neighbourhood depth");
  c_ret->add_option("--top-nodes", ret.top_nodes, "Nodes kept by PPR score");
  c_ret->add_option("--edge-cap", ret.edge_cap, "Maximum pruned edges");
  c_ret->add_flag("--no-confounders", ret.no_confounders, "Skip metapath confounders");

  RecordsArgs paths;
  paths.kg_name = "wikikg2";
  bool paths_directed = false;
  std::string paths_summary;
  auto* c_paths = app.add_subcommand("analyze-paths", "Shortest-path versus ground-truth overlap");
  paths.kg.add(c_paths);
  c_paths->add_option("--in", paths.in, "Input records")->required();
  c_paths->add_option("--out", paths.out, "Per-question statistics (JSONL)");
  c_paths->add_option("--summary", paths_summary, "Summary JSON (default stderr)");
  c_paths->add_option("--kg-name", paths.kg_name, "KG name of the answer set");
  c_paths->add_flag("--directed", paths_directed, "Follow edges head to tail only");

  RecordsArgs sup;
  sup.kg_name = "wikikg2";
  std::string sup_mode = "gt";
  bool sup_directed = false;
  std::size_t sup_max = 10000;
  auto* c_sup = app.add_subcommand("export-supervision", "Export GT or shortest-path training targets");
  sup.kg.add(c_sup, false);
  c_sup->add_option("--in", sup.in, "Input records")->required();
  c_sup->add_option("--out", sup.out, "Output (JSONL)");
  c_sup->add_option("--mode", sup_mode, "gt or sp");
  c_sup->add_option("--kg-name", sup.kg_name, "KG name of the answer set");
  c_sup->add_flag("--directed", sup_directed, "Follow edges head to tail only");
  c_sup->add_option("--max-paths", sup_max, "Path cap per seed/answer pair");

  SplitArgs spl;
  auto* c_spl = app.add_subcommand("split", "Design or validate a train/test split");
  c_spl->add_option("--in", spl.in, "Candidate pool");
  c_spl->add_option("--train", spl.train, "Train records")->required();
  c_spl->add_option("--test", spl.test, "Test records")->required();
  c_spl->add_option("--report", spl.report, "Report JSON (default stdout)");
  c_spl->add_option("--config", spl.config, "JSON config file");
  c_spl->add_option("--top-k", spl.top_k, "Relations allowed in train");
  c_spl->add_option("--min-per-category", spl.min_per_category, "Minimum test cell size");
  c_spl->add_option("--per-iso", spl.per_iso, "In-distribution test questions per isomorphism code");
  c_spl->add_option("--reserve", spl.reserved, "Isomorphism code reserved for test (repeatable)");
  c_spl->add_flag("--validate-only", spl.validate_only, "Only check an existing split");

  std::string st_in, st_out, st_kg = "wikikg2";
  auto* c_st = app.add_subcommand("stats", "Dataset statistics");
  c_st->add_option("--in", st_in, "Input records")->required();
  c_st->add_option("--out", st_out, "Output JSON");
  c_st->add_option("--kg-name", st_kg, "KG name for answer counts");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score retrieval results");
  ev.kg.add(c_ev, false);
  c_ev->add_option("--dataset", ev.dataset, "Dataset records")->required();
  c_ev->add_option("--results", ev.results, "Results (JSONL)")->required();
  c_ev->add_option("--baseline", ev.baseline, "Baseline results for EM deltas");
  c_ev->add_option("--group-by", ev.group_by, "none, isomorphism, n_hops or test_type");
  c_ev->add_option("--match", ev.match, "exact or inverse");
  c_ev->add_option("--kg-name", ev.kg_name, "KG name of the answer set");
  c_ev->add_option("--out", ev.out, "Report (default stdout)");
  c_ev->add_option("--per-question", ev.per_question, "Per-question scores (JSONL)");
  c_ev->add_flag("--json", ev.json, "JSON report instead of TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_json("usage_error", e.what());
    return 2;
  }

  try {
    if (*c_gen) return run_generate(gen);
    if (*c_val) return run_validate(val, val_rejections, val_current);
    if (*c_cls) return run_classify(cls);
    if (*c_red) return run_redundancy(red);
    if (*c_ret) return run_build_retrieval(ret);
    if (*c_paths) return run_analyze_paths(paths, paths_directed, paths_summary);
    if (*c_sup) return run_export_supervision(sup, sup_mode, sup_directed, sup_max);
    if (*c_spl) return run_split(spl);
    if (*c_st) return run_stats(st_in, st_out, st_kg);
    if (*c_ev) return run_evaluate(ev);
  } catch (const sk::ConfigError& e) {
    error_json(e.kind(), e.what());
    return 2;
  } catch (const sk::Error& e) {
    error_json(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_json("internal_error", e.what());
    return 1;
  }
  return 0;
}
