#include "thot/http_transport.hpp"

#include "httplib.h"
#include "thot/errors.hpp"

namespace thot {

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "URL has no scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kInvalidArgument, "unsupported URL scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.scheme_host_port.size() <= scheme_end + 3) throw Error(ErrorCode::kInvalidArgument, "URL has no host: " + url);
  return out;
}

HttpResponse HttpTransport::post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                                 std::chrono::milliseconds timeout) {
  const ParsedUrl parsed = split_url(url);
  httplib::Client client(parsed.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers request_headers;
  std::string content_type = "application/json";
  for (const auto& [name, value] : headers) {
    if (name == "Content-Type") {
      content_type = value;
    } else {
      request_headers.emplace(name, value);
    }
  }

  const auto start = std::chrono::steady_clock::now();
  auto result = client.Post(parsed.path, request_headers, body, content_type);
  if (!result) {
    const auto err = result.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && std::chrono::steady_clock::now() - start >= timeout);
    throw Error(timed_out ? ErrorCode::kTimeout : ErrorCode::kTransport,
                "POST " + url + " failed: " + httplib::to_string(err));
  }
  return HttpResponse{result->status, result->body};
}

}  // namespace thot
