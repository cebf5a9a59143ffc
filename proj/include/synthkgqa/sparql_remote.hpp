#pragma once

// Query execution against a remote SPARQL endpoint.

#include <chrono>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/http.hpp"
#include "synthkgqa/ids.hpp"
#include "synthkgqa/sparql.hpp"

namespace synthkgqa::sparql {

struct EndpointConfig {
  std::string url = "https://query.wikidata.org/sparql";
  std::string user_agent = "synthkgqa/0.1";
  std::chrono::milliseconds timeout{60000};
  net::RetryPolicy retry;
  std::size_t max_in_flight = 2;
};

namespace detail {

/// One N-Triples term: <iri>, "literal"..., or _:blank. Returns the id
/// for IRIs and nullopt otherwise; advances `pos` past the term.
inline std::optional<std::string> ntriples_term(const std::string& line, std::size_t& pos) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  if (pos >= line.size()) throw ProtocolError("truncated N-Triples line: " + line);
  if (line[pos] == '<') {
    const auto end = line.find('>', pos);
    if (end == std::string::npos) throw ProtocolError("unterminated IRI in N-Triples line: " + line);
    std::string iri = line.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    return detail::bare_id(iri);
  }
  if (line[pos] == '"') {
    std::size_t i = pos + 1;
    for (; i < line.size() && line[i] != '"'; ++i)
      if (line[i] == '\\') ++i;
    if (i >= line.size()) throw ProtocolError("unterminated literal in N-Triples line: " + line);
    pos = i + 1;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '.') {
      if (line[pos] == '<') pos = line.find('>', pos);
      if (pos == std::string::npos) throw ProtocolError("bad datatype in N-Triples line: " + line);
      ++pos;
    }
    return std::nullopt;
  }
  if (line.compare(pos, 2, "_:") == 0) {
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    return std::nullopt;
  }
  throw ProtocolError("unexpected N-Triples term: " + line);
}

}  // namespace detail

/// Values bound to `variable` in a SPARQL JSON results document. Only
/// IRI bindings count; literals and blank nodes are skipped.
inline EntitySet parse_select_results(const std::string& body, const std::string& variable) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("malformed SPARQL JSON results: ") + e.what());
  }
  if (!j.is_object() || !j.contains("results") || !j["results"].is_object() || !j["results"].contains("bindings") ||
      !j["results"]["bindings"].is_array())
    throw ProtocolError("SPARQL JSON results without results.bindings");
  EntitySet out;
  for (const auto& row : j["results"]["bindings"]) {
    if (!row.is_object()) throw ProtocolError("binding row is not an object");
    auto it = row.find(variable);
    if (it == row.end()) continue;
    if (!it->is_object() || !it->contains("type") || !it->contains("value")) throw ProtocolError("malformed binding");
    if ((*it)["type"] != "uri") continue;
    out.insert(EntityId(detail::bare_id((*it)["value"].get<std::string>())));
  }
  return out;
}

/// IRI-only triples of an N-Triples document.
inline TripleSet parse_ntriples(const std::string& body) {
  TripleSet out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t pos = first;
    auto s = detail::ntriples_term(line, pos);
    auto p = detail::ntriples_term(line, pos);
    auto o = detail::ntriples_term(line, pos);
    if (s && p && o) out.insert(Triple{EntityId(*s), RelationId(*p), EntityId(*o)});
  }
  return out;
}

/// Client for one endpoint. Safe for concurrent use; the in-flight cap is
/// per client.
class RemoteEndpoint {
 public:
  RemoteEndpoint(EndpointConfig cfg, std::shared_ptr<net::HttpTransport> transport,
                 net::Sleeper sleeper = net::real_sleeper())
      : cfg_(std::move(cfg)), transport_(std::move(transport)), sleep_(std::move(sleeper)), limiter_(cfg_.max_in_flight) {}

  EntitySet select(const QueryAst& ast, const std::string& variable = "") {
    if (ast.form != QueryForm::Select) throw ArgumentError("select() needs a SELECT query");
    std::string var = variable;
    if (var.empty()) {
      if (ast.projection.size() != 1) throw QueryError("SELECT must project exactly one variable");
      var = ast.projection.front();
    }
    return parse_select_results(post(serialize(ast, {true}), "application/sparql-results+json"), var);
  }

  TripleSet construct(const QueryAst& ast) {
    return parse_ntriples(post(serialize(to_construct(ast), {true}), "application/n-triples"));
  }

  unsigned last_attempts() const { return last_attempts_; }

 private:
  std::string post(const std::string& query, const std::string& accept) {
    net::HttpRequest req;
    req.method = "POST";
    req.url = cfg_.url;
    req.headers = {{"Accept", accept}, {"User-Agent", cfg_.user_agent}};
    req.content_type = "application/x-www-form-urlencoded";
    req.body = "query=" + net::form_encode(query);
    unsigned attempts = 0;
    auto body = net::with_retry(
        cfg_.retry, sleep_,
        [&] {
          net::InFlightLimiter::Slot slot(limiter_);
          auto res = transport_->send(req, cfg_.timeout);
          net::check_status(res, cfg_.url);
          return res.body;
        },
        &attempts);
    last_attempts_ = attempts;
    return body;
  }

  EndpointConfig cfg_;
  std::shared_ptr<net::HttpTransport> transport_;
  net::Sleeper sleep_;
  net::InFlightLimiter limiter_;
  unsigned last_attempts_ = 0;
};

}  // namespace synthkgqa::sparql
