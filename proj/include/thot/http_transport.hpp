#pragma once

#include "thot/backend.hpp"

namespace thot {

// Transport over cpp-httplib; one client per request, so concurrent posts
// share nothing. Accepts http:// and https:// URLs.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                    std::chrono::milliseconds timeout) override;
};

struct ParsedUrl {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path;              // "/v1/chat/completions"
};

// Throws Error(kInvalidArgument) for URLs without an http(s) scheme or host.
ParsedUrl split_url(const std::string& url);

}  // namespace thot
