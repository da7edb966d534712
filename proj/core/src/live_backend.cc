// Copyright 2026 The tabsan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tabsan/llm_client.h"

#include <string>

#include "tabsan/error.h"
// After Eigen: <resolv.h> defines a `_res` macro that Eigen uses as a name.
#include "httplib.h"

namespace tabsan {

HttpTransport MakeHttpTransport(std::chrono::seconds timeout) {
  return [timeout](const std::string& url, const std::string& body,
                   const std::map<std::string, std::string>& headers) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "endpoint must be an absolute URL");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) return HttpResult{0, httplib::to_string(res.error())};
    return HttpResult{res->status, res->body};
  };
}

}  // namespace tabsan
