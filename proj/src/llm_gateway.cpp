#include "chiselforge/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

namespace chiselforge {

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::System:
      return "system";
    case ChatRole::User:
      return "user";
    case ChatRole::Assistant:
      return "assistant";
  }
  return "user";
}

void ProviderConfig::validate() const {
  if (max_retries < 0) throw PreconditionError("max_retries must be >= 0");
  if (request_timeout_s <= 0) throw PreconditionError("request_timeout_s must be positive");
  const bool http = endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0;
  if (!http || endpoint.find('/', endpoint.find("//") + 2) == std::string::npos) {
    throw PreconditionError("endpoint is not a well-formed http(s) URL with a path: " + endpoint);
  }
}

Sleeper real_sleeper() {
  return [](double seconds) {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  };
}

nlohmann::json build_request_body(const std::vector<ChatMessage>& messages, const ProviderConfig& cfg) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  nlohmann::json body{{"model", cfg.model_id}, {"messages", std::move(msgs)}};
  if (!cfg.sampling.provider_default) {
    body["temperature"] = cfg.sampling.temperature;
    body["top_p"] = cfg.sampling.top_p;
  }
  return body;
}

CompletionResult parse_completion_body(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw MalformedResponse("provider response is not JSON");
  }
  CompletionResult r;
  auto text_of = [](const nlohmann::json& content) -> std::string {
    if (content.is_string()) return content.get<std::string>();
    std::string out;
    if (content.is_array()) {
      for (const auto& part : content) {
        if (part.is_object() && part.contains("text") && part["text"].is_string()) {
          out += part["text"].get<std::string>();
        }
      }
    }
    return out;
  };
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& choice = j["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content")) {
      r.text = text_of(choice["message"]["content"]);
    }
  } else if (j.contains("content")) {
    r.text = text_of(j["content"]);
  }
  if (r.text.empty()) throw MalformedResponse("provider response carries no assistant text");
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    r.usage.prompt_tokens = u.value("prompt_tokens", u.value("input_tokens", 0L));
    r.usage.completion_tokens = u.value("completion_tokens", u.value("output_tokens", 0L));
  }
  return r;
}

namespace {

bool is_transient(int status) {
  return status == 0 || status == 408 || status == 409 || status == 425 || status == 429 ||
         (status >= 500 && status <= 599);
}

std::string truncated(const std::string& body, std::size_t max = 512) {
  return body.size() <= max ? body : body.substr(0, max) + "...";
}

}  // namespace

CompletionResult complete_detailed(const std::vector<ChatMessage>& messages, const ProviderConfig& cfg,
                                   ChatTransport& transport, const Sleeper& sleep) {
  if (messages.empty() || messages.front().role != ChatRole::System ||
      std::count_if(messages.begin(), messages.end(),
                    [](const ChatMessage& m) { return m.role == ChatRole::System; }) != 1) {
    throw PreconditionError("messages must start with exactly one system message");
  }
  for (const auto& m : messages) {
    if (m.content.empty()) throw PreconditionError("chat message with empty content");
  }
  if (cfg.max_retries < 0) throw PreconditionError("max_retries must be >= 0");

  std::string api_key;
  if (!cfg.api_key_env.empty()) {
    const char* v = std::getenv(cfg.api_key_env.c_str());
    if (!v || !*v) throw MissingApiKey(cfg.api_key_env);
    api_key = v;
  }

  const std::string body = build_request_body(messages, cfg).dump();
  TransportReply last;
  std::string last_error;
  const int max_attempts = 1 + cfg.max_retries;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (cfg.requests_per_minute > 0) sleep(TokenBucket::shared_for(cfg).reserve());
    last = transport.post(cfg, api_key, body);
    if (last.status >= 200 && last.status < 300) {
      try {
        auto r = parse_completion_body(last.body);
        r.attempts = attempt;
        return r;
      } catch (const MalformedResponse& e) {
        last_error = e.what();
      }
    } else if (last.status == 401 || last.status == 403) {
      throw ProviderError("authentication failed (HTTP " + std::to_string(last.status) + ")", last.status,
                          truncated(last.body));
    } else if (!is_transient(last.status)) {
      throw ProviderError("provider rejected the request (HTTP " + std::to_string(last.status) + ")",
                          last.status, truncated(last.body));
    } else {
      last_error = last.status == 0 ? "transport failure: " + truncated(last.body)
                                    : "HTTP " + std::to_string(last.status);
    }
    if (attempt < max_attempts) {
      const double delay =
          std::min(cfg.backoff_max_s, cfg.backoff_initial_s * std::pow(2.0, attempt - 1));
      sleep(delay);
    }
  }
  throw ProviderError("provider failed after " + std::to_string(max_attempts) + " attempts: " + last_error,
                      last.status, truncated(last.body));
}

std::string complete(const std::vector<ChatMessage>& messages, const ProviderConfig& cfg,
                     ChatTransport& transport, const Sleeper& sleep) {
  return complete_detailed(messages, cfg, transport, sleep).text;
}

TokenBucket::TokenBucket(double rate_per_s, double burst)
    : rate_(rate_per_s), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)), last_(Clock::now()) {}

double TokenBucket::reserve(Clock::time_point now) {
  std::lock_guard lock(mu_);
  if (now > last_) {
    tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }
  tokens_ -= 1.0;
  if (tokens_ >= 0 || rate_ <= 0) return 0.0;
  return -tokens_ / rate_;
}

TokenBucket& TokenBucket::shared_for(const ProviderConfig& cfg) {
  static std::mutex registry_mu;
  static std::map<std::string, std::unique_ptr<TokenBucket>> registry;
  std::lock_guard lock(registry_mu);
  auto& slot = registry[cfg.endpoint + "|" + cfg.model_id];
  if (!slot) {
    const double rate = cfg.requests_per_minute / 60.0;
    slot = std::make_unique<TokenBucket>(rate, std::max(1.0, std::floor(rate)));
  }
  return *slot;
}

}  // namespace chiselforge
