#pragma once

#include <string>

namespace condinsight {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POST a JSON body to an absolute http(s) URL. Transport failures return
/// status 0 with the error text in `body`.
HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const std::string& bearer_token, int timeout_seconds);

}  // namespace condinsight
