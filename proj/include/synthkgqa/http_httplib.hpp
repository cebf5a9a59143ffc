#pragma once

// cpp-httplib backed transport. Only the CLI includes this header.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"
#include "synthkgqa/http.hpp"

namespace synthkgqa::net {

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse send(const HttpRequest& request, std::chrono::milliseconds timeout) override {
    const auto url = parse_url(request.url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_follow_location(true);
    httplib::Headers headers(request.headers.begin(), request.headers.end());
    httplib::Result res = request.method == "GET"
                              ? client.Get(url.path, headers)
                              : client.Post(url.path, headers, request.body, request.content_type);
    if (!res) throw RemoteError(request.url + ": " + httplib::to_string(res.error()), 0, true);
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      out.headers[key] = v;
    }
    return out;
  }
};

}  // namespace synthkgqa::net
