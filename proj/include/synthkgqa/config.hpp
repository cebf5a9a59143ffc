#pragma once

// JSON configuration file shared by the CLI subcommands. Unknown keys are
// rejected.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"
#include "synthkgqa/analysis.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/http.hpp"
#include "synthkgqa/llm.hpp"
#include "synthkgqa/pipeline.hpp"
#include "synthkgqa/sparql_remote.hpp"
#include "synthkgqa/split.hpp"

namespace synthkgqa::config {

struct Config {
  pipeline::PipelineConfig pipeline;
  llm::ProviderConfig provider;
  std::optional<std::string> paraphrase_model;  // defaults to provider.model
  std::string replay_file;                      // replay provider when set
  std::string few_shots_file;
  analysis::RetrievalGraphConfig retrieval;
  split::SplitConstraints split;
  sparql::EndpointConfig endpoint;
};

namespace detail {

using Json = nlohmann::json;

class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + "expected an object");
  }

  /// Call after reading every known key.
  void finish(std::initializer_list<const char*> known) const {
    std::set<std::string> k(known.begin(), known.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!k.count(it.key())) throw ConfigError("unknown config key '" + path_ + it.key() + "'");
  }

  template <class T>
  void get(const char* key, T& out) const {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + "wrong type");
    }
  }

  template <class T>
  void positive(const char* key, T& out) const {
    get(key, out);
    if (j_.contains(key) && !(out > 0)) throw ConfigError(where(key) + "must be positive");
  }

  void millis(const char* key, std::chrono::milliseconds& out) const {
    long long v = out.count();
    get(key, v);
    if (v < 0) throw ConfigError(where(key) + "must be non-negative");
    out = std::chrono::milliseconds(v);
  }

  std::optional<Section> sub(const char* key) const {
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_ + key + ".");
  }

 private:
  std::string where(const std::string& key) const { return "config key '" + path_ + key + "': "; }
  const Json& j_;
  std::string path_;
};

inline void read_retry(const Section& s, net::RetryPolicy& r) {
  s.positive("max_attempts", r.max_attempts);
  s.millis("initial_backoff_ms", r.initial_backoff);
  s.positive("multiplier", r.multiplier);
  s.millis("max_backoff_ms", r.max_backoff);
  s.finish({"max_attempts", "initial_backoff_ms", "multiplier", "max_backoff_ms"});
}

}  // namespace detail

inline Config parse_config(const nlohmann::json& j) {
  using detail::Section;
  Config c;
  Section root(j, "");
  if (auto s = root.sub("sampler")) {
    s->positive("node_limit", c.pipeline.sampler.node_limit);
    s->positive("edge_limit", c.pipeline.sampler.edge_limit);
    s->finish({"node_limit", "edge_limit"});
  }
  if (auto s = root.sub("generation")) {
    auto& p = c.pipeline;
    s->get("k_weights", p.k_weights);
    bool any = false;
    for (double w : p.k_weights) {
      if (w < 0) throw ConfigError("config key 'generation.k_weights': weights must be non-negative");
      any = any || w > 0;
    }
    if (!any) throw ConfigError("config key 'generation.k_weights': needs a positive weight");
    s->get("rng_seed", p.rng_seed);
    s->positive("candidate_budget", p.candidate_budget);
    s->positive("workers", p.workers);
    s->positive("few_shot_limit", p.few_shot_limit);
    s->get("few_shots_file", c.few_shots_file);
    s->get("paraphrase", p.paraphrase);
    s->get("judge", p.judge);
    s->positive("judge_tries", p.judge_tries);
    s->get("temperature", p.generation_temperature);
    s->get("first_id", p.first_id);
    s->get("kg_name", p.validation.kg_name);
    s->get("structural_filters", p.validation.structural_filters);
    s->get("enforce_k", p.validation.enforce_k);
    s->finish({"k_weights", "rng_seed", "candidate_budget", "workers", "few_shot_limit", "few_shots_file", "paraphrase",
               "judge", "judge_tries", "temperature", "first_id", "kg_name", "structural_filters", "enforce_k"});
  }
  if (auto s = root.sub("provider")) {
    auto& p = c.provider;
    s->get("endpoint", p.endpoint);
    s->get("model", p.model);
    s->get("api_key_env", p.api_key_env);
    s->positive("max_in_flight", p.max_in_flight);
    s->get("temperature", p.temperature);
    s->millis("timeout_ms", p.timeout);
    std::string pm;
    s->get("paraphrase_model", pm);
    if (!pm.empty()) c.paraphrase_model = pm;
    s->get("replay_file", c.replay_file);
    if (auto r = s->sub("retry")) detail::read_retry(*r, p.retry);
    s->finish({"endpoint", "model", "api_key_env", "max_in_flight", "temperature", "timeout_ms", "paraphrase_model",
               "replay_file", "retry"});
  }
  if (auto s = root.sub("retrieval")) {
    auto& r = c.retrieval;
    s->positive("hop_depth", r.hop_depth);
    s->positive("top_nodes", r.top_nodes);
    s->positive("edge_cap", r.edge_cap);
    s->positive("metapath_cap", r.metapath_cap);
    s->get("add_confounders", r.add_confounders);
    s->get("kg_name", r.kg_name);
    s->positive("damping", r.ppr.damping);
    s->positive("tolerance", r.ppr.tolerance);
    s->positive("max_iters", r.ppr.max_iters);
    if (r.ppr.damping >= 1.0) throw ConfigError("config key 'retrieval.damping': must be below 1");
    s->finish({"hop_depth", "top_nodes", "edge_cap", "metapath_cap", "add_confounders", "kg_name", "damping",
               "tolerance", "max_iters"});
  }
  if (auto s = root.sub("split")) {
    auto& p = c.split;
    s->positive("relation_train_top_k", p.relation_train_top_k);
    s->positive("min_per_category", p.min_per_category);
    s->get("test_nonredundant_only", p.test_nonredundant_only);
    s->get("reserved_test_iso_codes", p.reserved_test_iso_codes);
    s->get("answer_disjointness", p.answer_disjointness);
    s->positive("in_distribution_per_iso", p.in_distribution_per_iso);
    s->finish({"relation_train_top_k", "min_per_category", "test_nonredundant_only", "reserved_test_iso_codes",
               "answer_disjointness", "in_distribution_per_iso"});
  }
  if (auto s = root.sub("endpoint")) {
    auto& e = c.endpoint;
    s->get("url", e.url);
    s->get("user_agent", e.user_agent);
    s->millis("timeout_ms", e.timeout);
    s->positive("max_in_flight", e.max_in_flight);
    if (auto r = s->sub("retry")) detail::read_retry(*r, e.retry);
    s->finish({"url", "user_agent", "timeout_ms", "max_in_flight", "retry"});
  }
  root.finish({"sampler", "generation", "provider", "retrieval", "split", "endpoint"});
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  auto c = parse_config(j);
  // Relative file references resolve against the config's directory.
  auto resolve = [&](std::string& f) {
    if (!f.empty() && std::filesystem::path(f).is_relative()) f = (path.parent_path() / f).string();
  };
  resolve(c.replay_file);
  resolve(c.few_shots_file);
  return c;
}

}  // namespace synthkgqa::config
