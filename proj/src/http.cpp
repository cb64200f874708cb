#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "condinsight/http.hpp"

namespace condinsight {

HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const std::string& bearer_token, int timeout_seconds) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return {0, "malformed url: " + url};
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  auto res = client.Post(path, headers, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

}  // namespace condinsight
