#include "httplib.h"

#include "chiselforge/llm_gateway.hpp"

namespace chiselforge {

TransportReply HttpTransport::post(const ProviderConfig& cfg, const std::string& api_key,
                                   const std::string& json_body) {
  const auto scheme_end = cfg.endpoint.find("//");
  const auto path_start = cfg.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 2);
  if (scheme_end == std::string::npos || path_start == std::string::npos) {
    return {0, "malformed endpoint " + cfg.endpoint};
  }
  httplib::Client client(cfg.endpoint.substr(0, path_start));
  const auto secs = static_cast<time_t>(cfg.request_timeout_s);
  const auto usecs = static_cast<time_t>((cfg.request_timeout_s - static_cast<double>(secs)) * 1e6);
  if (secs >= 30) {
    client.set_connection_timeout(30, 0);
  } else {
    client.set_connection_timeout(secs, usecs);
  }
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key);
    headers.emplace("x-api-key", api_key);
  }
  auto res = client.Post(cfg.endpoint.substr(path_start), headers, json_body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

}  // namespace chiselforge
