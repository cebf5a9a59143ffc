#pragma once

// Transport-neutral HTTP types, retry loop and in-flight limiting shared by
// the SPARQL endpoint client and the chat-completion client.

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "synthkgqa/errors.hpp"

namespace synthkgqa::net {

struct HttpRequest {
  std::string method = "POST";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
  std::string content_type;
};

struct HttpResponse {
  int status = 0;
  std::map<std::string, std::string> headers;  // lower-cased names
  std::string body;
};

/// Sends one request. Implementations throw RemoteError with status 0 on
/// transport failure or timeout; HTTP error statuses are returned as-is.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request, std::chrono::milliseconds timeout) = 0;
};

inline bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

/// Retry-After in delta-seconds form; HTTP-date values are ignored.
inline std::optional<std::chrono::milliseconds> parse_retry_after(const HttpResponse& r) {
  auto it = r.headers.find("retry-after");
  if (it == r.headers.end()) return std::nullopt;
  const std::string& v = it->second;
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
  return std::chrono::milliseconds(std::stoll(v) * 1000);
}

/// Turns a non-2xx response into a RemoteError.
inline void check_status(const HttpResponse& r, const std::string& what) {
  if (r.status >= 200 && r.status < 300) return;
  std::string snippet = r.body.substr(0, 200);
  throw RemoteError(what + " returned HTTP " + std::to_string(r.status) + (snippet.empty() ? "" : ": " + snippet),
                    r.status, retryable_status(r.status), parse_retry_after(r));
}

struct RetryPolicy {
  unsigned max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  /// Delay before attempt `attempt + 1`, after `attempt` failures (1-based).
  std::chrono::milliseconds backoff(unsigned attempt) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (unsigned i = 1; i < attempt; ++i) ms *= multiplier;
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Runs `f` until it succeeds, a non-retryable RemoteError is thrown or the
/// attempts are used up. A server Retry-After takes precedence over the
/// backoff schedule. `attempts` receives the number of calls made.
template <class F>
auto with_retry(const RetryPolicy& policy, const Sleeper& sleep, F&& f, unsigned* attempts = nullptr) -> decltype(f()) {
  const unsigned max_attempts = std::max(1u, policy.max_attempts);
  for (unsigned attempt = 1;; ++attempt) {
    if (attempts) *attempts = attempt;
    try {
      return f();
    } catch (const RemoteError& e) {
      if (!e.retryable() || attempt >= max_attempts) throw;
      sleep(e.retry_after().value_or(policy.backoff(attempt)));
    }
  }
}

/// Caps the number of concurrent requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit) {
    if (limit == 0) throw ArgumentError("max in-flight requests must be at least 1");
  }

  class Slot {
   public:
    explicit Slot(InFlightLimiter& l) : l_(l) { l_.acquire(); }
    ~Slot() { l_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InFlightLimiter& l_;
  };

  std::size_t limit() const { return limit_; }
  std::size_t peak() const {
    std::lock_guard lock(m_);
    return peak_;
  }

 private:
  void acquire() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    peak_ = std::max(peak_, ++active_);
  }
  void release() {
    {
      std::lock_guard lock(m_);
      --active_;
    }
    cv_.notify_one();
  }

  std::size_t limit_;
  std::size_t active_ = 0;
  std::size_t peak_ = 0;
  mutable std::mutex m_;
  std::condition_variable cv_;
};

/// Splits "scheme://host[:port]/path?query" into origin and path.
struct ParsedUrl {
  std::string scheme;
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto sep = url.find("://");
  if (sep == std::string::npos || sep == 0) throw ArgumentError("not an absolute URL: " + url);
  ParsedUrl out;
  out.scheme = url.substr(0, sep);
  if (out.scheme != "http" && out.scheme != "https") throw ArgumentError("unsupported URL scheme: " + url);
  const auto slash = url.find('/', sep + 3);
  out.origin = url.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : url.substr(slash);
  if (out.origin.size() == sep + 3) throw ArgumentError("URL without host: " + url);
  return out;
}

/// application/x-www-form-urlencoded component encoding.
inline std::string form_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.' ||
        c == '~') {
      out += static_cast<char>(c);
    } else if (c == ' ') {
      out += '+';
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

}  // namespace synthkgqa::net
