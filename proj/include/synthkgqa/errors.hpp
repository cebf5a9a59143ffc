#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace synthkgqa {

/// Base of every exception thrown by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class ArgumentError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "argument_error"; }
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(std::string id)
      : Error("unknown id: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }
  const char* kind() const noexcept override { return "not_found"; }

 private:
  std::string id_;
};

/// Malformed input text. `line` is 1-based for line-oriented formats,
/// `position` a 0-based byte offset for inline text (queries, replies).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t position)
      : Error(message + " (line " + std::to_string(line) + ", offset " +
              std::to_string(position) + ")"),
        line_(line),
        position_(position) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t position() const noexcept { return position_; }
  const char* kind() const noexcept override { return "parse_error"; }

 private:
  std::size_t line_;
  std::size_t position_;
};

class LoadError : public Error {
 public:
  LoadError(const std::string& message, std::vector<std::string> ids)
      : Error(message), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const char* kind() const noexcept override { return "load_error"; }

 private:
  std::vector<std::string> ids_;
};

/// A syntactically recognised SPARQL construct outside the conjunctive
/// fragment (OPTIONAL, FILTER, property paths, ...).
class UnsupportedFeature : public Error {
 public:
  UnsupportedFeature(std::string feature, std::size_t begin, std::size_t end)
      : Error("unsupported SPARQL feature '" + feature + "' at [" +
              std::to_string(begin) + ", " + std::to_string(end) + ")"),
        feature_(std::move(feature)),
        begin_(begin),
        end_(end) {}
  const std::string& feature() const noexcept { return feature_; }
  std::pair<std::size_t, std::size_t> span() const noexcept { return {begin_, end_}; }
  const char* kind() const noexcept override { return "unsupported_feature"; }

 private:
  std::string feature_;
  std::size_t begin_;
  std::size_t end_;
};

class QueryError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "query_error"; }
};

/// Transport failure, HTTP error status or timeout talking to a remote
/// service. status == 0 means no HTTP response was received.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& message, int status, bool retryable,
              std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : Error(message), status_(status), retryable_(retryable), retry_after_(retry_after) {}
  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }
  const char* kind() const noexcept override { return "remote_error"; }

 private:
  int status_;
  bool retryable_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "protocol_error"; }
};

class GatewayError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "gateway_error"; }
};

class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(std::string digest)
      : Error("no replay entry for request digest " + digest), digest_(std::move(digest)) {}
  const std::string& digest() const noexcept { return digest_; }
  const char* kind() const noexcept override { return "replay_miss"; }

 private:
  std::string digest_;
};

/// Structured LLM reply that does not follow the requested layout.
class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format_error"; }
};

class ConstraintError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "constraint_error"; }
};

class SchemaError : public Error {
 public:
  SchemaError(std::string field, std::string record_id, const std::string& message)
      : Error("record " + (record_id.empty() ? std::string("<unknown>") : record_id) +
              ", field '" + field + "': " + message),
        field_(std::move(field)),
        record_id_(std::move(record_id)) {}
  const std::string& field() const noexcept { return field_; }
  const std::string& record_id() const noexcept { return record_id_; }
  const char* kind() const noexcept override { return "schema_error"; }

 private:
  std::string field_;
  std::string record_id_;
};

class JoinError : public Error {
 public:
  explicit JoinError(std::vector<std::string> ids)
      : Error(make_message(ids)), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const char* kind() const noexcept override { return "join_error"; }

 private:
  static std::string make_message(const std::vector<std::string>& ids) {
    std::string msg = "unknown question ids:";
    for (const auto& id : ids) msg += " " + id;
    return msg;
  }
  std::vector<std::string> ids_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "usage_error"; }
};

}  // namespace synthkgqa
