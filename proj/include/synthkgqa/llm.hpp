#pragma once

// Chat-completion providers and the gateway that adds retries, an
// in-flight cap and request digests.

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "synthkgqa/errors.hpp"
#include "synthkgqa/http.hpp"

namespace synthkgqa::llm {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  unsigned sample_index = 0;  // distinguishes repeated samples of one prompt
};

inline void check_messages(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) throw ArgumentError("chat request without messages");
  for (const auto& m : messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      throw ArgumentError("invalid chat role '" + m.role + "'");
    if (m.content.empty()) throw ArgumentError("chat message with empty content");
  }
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Canonical request text used for replay keys. Temperature is left out so
/// that recorded transcripts survive sampling-parameter changes.
inline std::string canonical_request(const ChatRequest& req) {
  nlohmann::ordered_json j;
  j["model"] = req.model;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : req.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  j["sample_index"] = req.sample_index;
  return j.dump();
}

inline std::string request_digest(const ChatRequest& req) { return sha256_hex(canonical_request(req)); }

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Reply content. Throws RemoteError for transport/HTTP failures.
  virtual std::string complete(const ChatRequest& req) = 0;
};

/// Scripted replies keyed by request digest. Replay files are JSON Lines
/// with "digest" and "reply" (other keys are ignored).
class ReplayProvider : public ChatProvider {
 public:
  ReplayProvider() = default;

  static ReplayProvider load(std::istream& in) {
    ReplayProvider p;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("replay line " + std::to_string(n) + ": " + e.what());
      }
      if (!j.is_object() || !j.contains("digest") || !j.contains("reply") || !j["digest"].is_string() ||
          !j["reply"].is_string())
        throw FormatError("replay line " + std::to_string(n) + ": expected string fields digest and reply");
      p.replies_[j["digest"].get<std::string>()] = j["reply"].get<std::string>();
    }
    return p;
  }

  static ReplayProvider load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open replay file " + path.string());
    return load(in);
  }

  void add(const std::string& digest, std::string reply) { replies_[digest] = std::move(reply); }
  void add(const ChatRequest& req, std::string reply) { add(request_digest(req), std::move(reply)); }
  std::size_t size() const { return replies_.size(); }

  std::string complete(const ChatRequest& req) override {
    const auto d = request_digest(req);
    auto it = replies_.find(d);
    if (it == replies_.end()) throw ReplayMissError(d);
    return it->second;
  }

 private:
  std::map<std::string, std::string> replies_;
};

/// Wraps another provider and keeps every exchange for later replay.
class RecordingProvider : public ChatProvider {
 public:
  explicit RecordingProvider(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}

  std::string complete(const ChatRequest& req) override {
    auto reply = inner_->complete(req);
    std::lock_guard lock(m_);
    log_[request_digest(req)] = {canonical_request(req), reply};
    return reply;
  }

  void write(std::ostream& out) const {
    std::lock_guard lock(m_);
    for (const auto& [digest, entry] : log_) {
      nlohmann::ordered_json j;
      j["digest"] = digest;
      j["request"] = nlohmann::json::parse(entry.first);
      j["reply"] = entry.second;
      out << j.dump() << '\n';
    }
  }

 private:
  std::shared_ptr<ChatProvider> inner_;
  mutable std::mutex m_;
  std::map<std::string, std::pair<std::string, std::string>> log_;
};

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4.1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  net::RetryPolicy retry;
  double temperature = 0.0;
  std::chrono::milliseconds timeout{120000};
};

/// OpenAI-compatible chat-completions client.
class OpenAiProvider : public ChatProvider {
 public:
  OpenAiProvider(ProviderConfig cfg, std::shared_ptr<net::HttpTransport> transport)
      : cfg_(std::move(cfg)), transport_(std::move(transport)) {}

  std::string complete(const ChatRequest& req) override {
    nlohmann::ordered_json body;
    body["model"] = req.model;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : req.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = req.temperature;
    net::HttpRequest http;
    http.url = cfg_.endpoint;
    http.content_type = "application/json";
    http.body = body.dump();
    http.headers["Accept"] = "application/json";
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (!key || !*key) throw GatewayError("environment variable " + cfg_.api_key_env + " is not set");
      http.headers["Authorization"] = std::string("Bearer ") + key;
    }
    auto res = transport_->send(http, cfg_.timeout);
    net::check_status(res, cfg_.endpoint);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res.body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed chat-completions response: ") + e.what());
    }
  }

 private:
  ProviderConfig cfg_;
  std::shared_ptr<net::HttpTransport> transport_;
};

struct SendResult {
  std::string content;
  unsigned attempts = 1;
  std::string digest;
};

/// Entry point used by prompts and the pipeline. Safe for concurrent use.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatProvider> provider, ProviderConfig cfg, net::Sleeper sleeper = net::real_sleeper())
      : provider_(std::move(provider)), cfg_(std::move(cfg)), sleep_(std::move(sleeper)), limiter_(cfg_.max_in_flight) {}

  const ProviderConfig& config() const { return cfg_; }

  SendResult send(const std::vector<ChatMessage>& messages, unsigned sample_index = 0,
                  std::optional<double> temperature = std::nullopt) {
    check_messages(messages);
    ChatRequest req{cfg_.model, messages, temperature.value_or(cfg_.temperature), sample_index};
    SendResult out;
    out.digest = request_digest(req);
    try {
      out.content = net::with_retry(
          cfg_.retry, sleep_,
          [&] {
            net::InFlightLimiter::Slot slot(limiter_);
            return provider_->complete(req);
          },
          &out.attempts);
    } catch (const RemoteError& e) {
      throw GatewayError("chat provider failed after " + std::to_string(out.attempts) + " attempt(s): " + e.what());
    } catch (const ProtocolError& e) {
      throw GatewayError(e.what());
    }
    return out;
  }

  std::size_t peak_in_flight() const { return limiter_.peak(); }

 private:
  std::shared_ptr<ChatProvider> provider_;
  ProviderConfig cfg_;
  net::Sleeper sleep_;
  net::InFlightLimiter limiter_;
};

}  // namespace synthkgqa::llm
