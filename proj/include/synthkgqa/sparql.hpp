#pragma once

// Conjunctive SPARQL fragment: SELECT / CONSTRUCT over one basic graph
// pattern. Anything else is rejected with UnsupportedFeature.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synthkgqa/errors.hpp"

namespace synthkgqa::sparql {

inline constexpr std::string_view kEntityNamespace = "http://www.wikidata.org/entity/";
inline constexpr std::string_view kDirectClaimNamespace = "http://www.wikidata.org/prop/direct/";

struct Term {
  enum class Kind { Constant, Variable };
  Kind kind = Kind::Constant;
  std::string value;  // bare id, or variable name without '?'

  static Term constant(std::string id) { return Term{Kind::Constant, std::move(id)}; }
  static Term variable(std::string name) { return Term{Kind::Variable, std::move(name)}; }
  bool is_variable() const noexcept { return kind == Kind::Variable; }

  friend auto operator<=>(const Term&, const Term&) = default;
  friend bool operator==(const Term&, const Term&) = default;
};

struct TriplePattern {
  Term subject;
  Term predicate;
  Term object;

  friend auto operator<=>(const TriplePattern&, const TriplePattern&) = default;
  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

enum class QueryForm { Select, Construct };

struct QueryAst {
  QueryForm form = QueryForm::Select;
  bool distinct = false;
  std::vector<std::string> projection;           // SELECT only
  std::vector<TriplePattern> construct_template;  // CONSTRUCT only
  std::vector<TriplePattern> where;

  friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

/// Variables of a pattern list in order of first appearance.
inline std::vector<std::string> variables_of(const std::vector<TriplePattern>& patterns) {
  std::vector<std::string> out;
  auto add = [&](const Term& t) {
    if (t.is_variable() && std::find(out.begin(), out.end(), t.value) == out.end()) out.push_back(t.value);
  };
  for (const auto& p : patterns) {
    add(p.subject);
    add(p.predicate);
    add(p.object);
  }
  return out;
}

/// SELECT -> CONSTRUCT whose template is the full WHERE pattern list.
/// CONSTRUCT input is returned unchanged.
inline QueryAst to_construct(const QueryAst& ast) {
  if (ast.form == QueryForm::Construct) return ast;
  QueryAst out;
  out.form = QueryForm::Construct;
  out.construct_template = ast.where;
  out.where = ast.where;
  return out;
}

namespace detail {

enum class Tok {
  End,
  Iri,        // <...>, text without brackets
  PName,      // prefix:local, text = full "prefix:local"
  Var,        // ?x, text = name
  Word,       // bare identifier or keyword
  LBrace,
  RBrace,
  Dot,
  Semicolon,
  Comma,
  Star,
  Other,      // any other character sequence we do not support
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
         static_cast<unsigned char>(c) >= 0x80;
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    Token tok;
    tok.begin = pos_;
    if (pos_ >= text_.size()) {
      tok.end = pos_;
      return tok;
    }
    const char c = text_[pos_];
    auto single = [&](Tok kind) {
      ++pos_;
      tok.kind = kind;
      tok.text = std::string(1, c);
      tok.end = pos_;
      return tok;
    };
    switch (c) {
      case '{': return single(Tok::LBrace);
      case '}': return single(Tok::RBrace);
      case '.': return single(Tok::Dot);
      case ';': return single(Tok::Semicolon);
      case ',': return single(Tok::Comma);
      case '*': return single(Tok::Star);
      default: break;
    }
    if (c == '<') {
      const auto close = text_.find('>', pos_ + 1);
      const auto space = text_.find_first_of(" \t\r\n", pos_ + 1);
      if (close != std::string_view::npos && (space == std::string_view::npos || space > close)) {
        tok.kind = Tok::Iri;
        tok.text = std::string(text_.substr(pos_ + 1, close - pos_ - 1));
        pos_ = close + 1;
        tok.end = pos_;
        return tok;
      }
      return single(Tok::Other);  // comparison operator
    }
    if ((c == '?' || c == '$') && pos_ + 1 < text_.size() && is_name_char(text_[pos_ + 1])) {
      std::size_t p = pos_ + 1;
      while (p < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[p])) || text_[p] == '_')) ++p;
      tok.kind = Tok::Var;
      tok.text = std::string(text_.substr(pos_ + 1, p - pos_ - 1));
      pos_ = p;
      tok.end = pos_;
      return tok;
    }
    if (is_name_char(c) || c == ':') {
      std::size_t p = pos_;
      while (p < text_.size() && is_name_char(text_[p])) ++p;
      bool pname = false;
      if (p < text_.size() && text_[p] == ':') {
        pname = true;
        ++p;
        // Local part; a '.' is only part of the name when a name char follows.
        while (p < text_.size()) {
          if (is_name_char(text_[p])) {
            ++p;
          } else if (text_[p] == '.' && p + 1 < text_.size() && is_name_char(text_[p + 1])) {
            ++p;
          } else {
            break;
          }
        }
      }
      tok.kind = pname ? Tok::PName : Tok::Word;
      tok.text = std::string(text_.substr(pos_, p - pos_));
      pos_ = p;
      tok.end = pos_;
      return tok;
    }
    // Literals, path operators, blank nodes and the like.
    std::size_t p = pos_ + 1;
    if (c == '"' || c == '\'') {
      const auto close = text_.find(c, pos_ + 1);
      p = close == std::string_view::npos ? text_.size() : close + 1;
    }
    tok.kind = Tok::Other;
    tok.text = std::string(text_.substr(pos_, p - pos_));
    pos_ = p;
    tok.end = pos_;
    return tok;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline const std::set<std::string>& unsupported_keywords() {
  static const std::set<std::string> kw = {
      "OPTIONAL", "FILTER", "UNION", "MINUS", "BIND", "VALUES", "GRAPH", "SERVICE", "ORDER",
      "GROUP", "HAVING", "LIMIT", "OFFSET", "ASK", "DESCRIBE", "FROM", "NOT", "EXISTS",
      "INSERT", "DELETE", "LOAD", "CLEAR", "DROP", "CREATE", "WITH", "USING", "BASE"};
  return kw;
}

/// Strips the Wikidata entity / direct-claim namespaces; other IRIs are
/// kept whole as opaque ids.
inline std::string bare_id(std::string_view iri) {
  for (std::string_view ns : {kEntityNamespace, kDirectClaimNamespace}) {
    if (iri.size() > ns.size() && iri.substr(0, ns.size()) == ns) return std::string(iri.substr(ns.size()));
  }
  return std::string(iri);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) {
    prefixes_["wd"] = std::string(kEntityNamespace);
    prefixes_["wdt"] = std::string(kDirectClaimNamespace);
    advance();
  }

  QueryAst parse() {
    while (is_word("PREFIX")) parse_prefix();
    QueryAst ast;
    if (is_word("SELECT")) {
      advance();
      ast.form = QueryForm::Select;
      if (is_word("DISTINCT")) {
        ast.distinct = true;
        advance();
      } else if (is_word("REDUCED")) {
        advance();
      }
      if (cur_.kind == Tok::Star) unsupported("SELECT *");
      while (cur_.kind == Tok::Var) {
        if (std::find(ast.projection.begin(), ast.projection.end(), cur_.text) == ast.projection.end())
          ast.projection.push_back(cur_.text);
        advance();
      }
      if (ast.projection.empty()) {
        if (cur_.kind == Tok::Other && cur_.text == "(") unsupported("projection expression");
        fail("expected projected variable");
      }
      if (is_word("WHERE")) advance();
      ast.where = parse_group();
    } else if (is_word("CONSTRUCT")) {
      advance();
      ast.form = QueryForm::Construct;
      if (cur_.kind != Tok::LBrace) {
        if (is_word("WHERE")) unsupported("CONSTRUCT WHERE shorthand");
        fail("expected '{'");
      }
      ast.construct_template = parse_group();
      if (is_word("WHERE")) advance();
      ast.where = parse_group();
      for (const auto& p : ast.construct_template) {
        if (std::find(ast.where.begin(), ast.where.end(), p) == ast.where.end())
          throw UnsupportedFeature("CONSTRUCT template pattern absent from WHERE", 0, 0);
      }
    } else {
      check_unsupported_word();
      fail("expected SELECT or CONSTRUCT");
    }
    if (cur_.kind != Tok::End) {
      check_unsupported_word();
      fail("unexpected trailing input");
    }
    std::set<std::string> node_vars, predicate_vars;
    for (const auto& p : ast.where) {
      if (p.subject.is_variable()) node_vars.insert(p.subject.value);
      if (p.object.is_variable()) node_vars.insert(p.object.value);
      if (p.predicate.is_variable()) predicate_vars.insert(p.predicate.value);
    }
    for (const auto& v : predicate_vars)
      if (node_vars.count(v)) throw UnsupportedFeature("variable ?" + v + " used as node and predicate", 0, 0);
    return ast;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  bool is_word(std::string_view kw) const { return cur_.kind == Tok::Word && upper(cur_.text) == kw; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + (cur_.kind == Tok::End ? " at end of query" : " near '" + cur_.text + "'"), 1,
                     cur_.begin);
  }
  [[noreturn]] void unsupported(const std::string& feature) const {
    throw UnsupportedFeature(feature, cur_.begin, cur_.end);
  }

  void check_unsupported_word() const {
    if (cur_.kind == Tok::Word) {
      const auto u = upper(cur_.text);
      if (unsupported_keywords().count(u)) unsupported(u);
    }
  }

  void parse_prefix() {
    advance();
    if (cur_.kind != Tok::PName || cur_.text.back() != ':') fail("expected prefix name");
    std::string name = cur_.text.substr(0, cur_.text.size() - 1);
    advance();
    if (cur_.kind != Tok::Iri) fail("expected IRI in PREFIX declaration");
    prefixes_[name] = cur_.text;
    advance();
  }

  std::vector<TriplePattern> parse_group() {
    if (cur_.kind != Tok::LBrace) {
      check_unsupported_word();
      fail("expected '{'");
    }
    advance();
    std::vector<TriplePattern> out;
    while (cur_.kind != Tok::RBrace) {
      if (cur_.kind == Tok::End) fail("unterminated group");
      if (cur_.kind == Tok::LBrace) unsupported("nested group");
      if (cur_.kind == Tok::Dot) {
        advance();
        continue;
      }
      Term subject = parse_term(/*predicate=*/false);
      parse_predicate_object_list(subject, out);
      if (cur_.kind == Tok::Dot) {
        advance();
      } else if (cur_.kind != Tok::RBrace) {
        check_unsupported_word();
        fail("expected '.' or '}'");
      }
    }
    advance();
    return out;
  }

  void parse_predicate_object_list(const Term& subject, std::vector<TriplePattern>& out) {
    while (true) {
      Term predicate = parse_term(/*predicate=*/true);
      while (true) {
        Term object = parse_term(/*predicate=*/false);
        out.push_back(TriplePattern{subject, predicate, object});
        if (cur_.kind != Tok::Comma) break;
        advance();
      }
      if (cur_.kind != Tok::Semicolon) return;
      while (cur_.kind == Tok::Semicolon) advance();
      if (cur_.kind == Tok::Dot || cur_.kind == Tok::RBrace) return;
    }
  }

  Term parse_term(bool predicate) {
    Term term;
    switch (cur_.kind) {
      case Tok::Var:
        term = Term::variable(cur_.text);
        break;
      case Tok::Iri:
        if (cur_.text.empty()) fail("empty IRI");
        term = Term::constant(bare_id(cur_.text));
        break;
      case Tok::PName: {
        const auto colon = cur_.text.find(':');
        const std::string prefix = cur_.text.substr(0, colon);
        const std::string local = cur_.text.substr(colon + 1);
        auto it = prefixes_.find(prefix);
        if (it == prefixes_.end()) fail("undeclared prefix '" + prefix + ":'");
        if (local.empty()) fail("empty local name");
        term = Term::constant(bare_id(it->second + local));
        break;
      }
      case Tok::Word: {
        const auto u = upper(cur_.text);
        if (unsupported_keywords().count(u)) unsupported(u);
        if (predicate && cur_.text == "a") unsupported("'a' (rdf:type)");
        if (u == "TRUE" || u == "FALSE" || std::isdigit(static_cast<unsigned char>(cur_.text[0])) != 0) {
          // Numeric / boolean literals; ids like "Q42" start with a letter.
          if (std::all_of(cur_.text.begin(), cur_.text.end(), [](char c) {
                return std::isdigit(static_cast<unsigned char>(c)) != 0;
              }) || u == "TRUE" || u == "FALSE")
            unsupported("literal");
        }
        term = Term::constant(cur_.text);
        break;
      }
      case Tok::Other:
        if (cur_.text.front() == '"' || cur_.text.front() == '\'') unsupported("literal");
        if (cur_.text == "[" || cur_.text == "_") unsupported("blank node");
        if (cur_.text == "(") unsupported("collection or expression");
        if (predicate || cur_.text == "^" || cur_.text == "/" || cur_.text == "|" || cur_.text == "!")
          unsupported("property path");
        fail("unexpected token");
      case Tok::Star:
        unsupported("property path");
      default:
        fail(predicate ? "expected predicate" : "expected term");
    }
    advance();
    if (predicate && cur_.kind == Tok::Other &&
        (cur_.text == "/" || cur_.text == "|" || cur_.text == "+" || cur_.text == "?" || cur_.text == "*"))
      unsupported("property path");
    if (predicate && cur_.kind == Tok::Star) unsupported("property path");
    return term;
  }

  Lexer lexer_;
  Token cur_;
  std::map<std::string, std::string> prefixes_;
};

inline bool is_safe_local(std::string_view id) {
  if (id.empty() || id.front() == '-') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

inline std::string render_constant(const std::string& id, bool predicate) {
  if (is_safe_local(id)) return (predicate ? "wdt:" : "wd:") + id;
  if (id.find_first_of("<> \t\r\n\"{}|^`\\") != std::string::npos)
    throw ArgumentError("id cannot be written as a SPARQL IRI: " + id);
  return "<" + id + ">";
}

inline std::string render_term(const Term& t, bool predicate) {
  return t.is_variable() ? "?" + t.value : render_constant(t.value, predicate);
}

inline void render_patterns(std::string& out, const std::vector<TriplePattern>& patterns) {
  out += "{";
  for (const auto& p : patterns) {
    out += " ";
    out += render_term(p.subject, false);
    out += " ";
    out += render_term(p.predicate, true);
    out += " ";
    out += render_term(p.object, false);
    out += ".";
  }
  out += " }";
}

}  // namespace detail

/// Parses the supported fragment. Prefixed and `<IRI>` constants are
/// stored as bare ids (the Wikidata entity and direct-claim namespaces are
/// stripped; `wd:` and `wdt:` are predeclared).
inline QueryAst parse_query(std::string_view text) { return detail::Parser(text).parse(); }

struct SerializeOptions {
  /// Emit PREFIX declarations for wd:/wdt: (needed by endpoints that do
  /// not predefine them).
  bool declare_prefixes = false;
};

/// Standard SPARQL text for an AST; parse_query(serialize(ast)) == ast.
inline std::string serialize(const QueryAst& ast, SerializeOptions options = {}) {
  std::string out;
  if (options.declare_prefixes) {
    out += "PREFIX wd: <" + std::string(kEntityNamespace) + ">\n";
    out += "PREFIX wdt: <" + std::string(kDirectClaimNamespace) + ">\n";
  }
  if (ast.form == QueryForm::Select) {
    out += "SELECT ";
    if (ast.distinct) out += "DISTINCT ";
    for (const auto& v : ast.projection) out += "?" + v + " ";
    out += "WHERE ";
  } else {
    out += "CONSTRUCT ";
    detail::render_patterns(out, ast.construct_template);
    out += " WHERE ";
  }
  detail::render_patterns(out, ast.where);
  return out;
}

}  // namespace synthkgqa::sparql
