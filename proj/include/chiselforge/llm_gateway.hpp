#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "chiselforge/domain.hpp"
#include "json.hpp"

namespace chiselforge {

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole role);

struct ChatMessage {
  ChatRole role = ChatRole::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ProviderConfig {
  std::string endpoint;  // full chat-completions URL
  std::string model_id;
  std::string api_key_env;  // empty: no Authorization header
  double request_timeout_s = 120;
  int max_retries = 3;
  Sampling sampling;
  double backoff_initial_s = 1.0;
  double backoff_max_s = 30.0;
  double requests_per_minute = 0;  // 0 disables rate limiting

  void validate() const;
};

/// The provider could not produce a completion.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, int status = 0, std::string body = {})
      : std::runtime_error(what), status_(status), body_(std::move(body)) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

/// The API key variable named in ProviderConfig is unset.
class MissingApiKey : public ProviderError {
 public:
  explicit MissingApiKey(const std::string& variable)
      : ProviderError("API key environment variable " + variable + " is not set"), variable_(variable) {}
  const std::string& variable() const { return variable_; }

 private:
  std::string variable_;
};

/// A model response lacks the structure the caller needs.
class MalformedResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One HTTP exchange. status 0 means the request never got a response.
struct TransportReply {
  int status = 0;
  std::string body;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual TransportReply post(const ProviderConfig& cfg, const std::string& api_key,
                              const std::string& json_body) = 0;
};

/// Plain HTTP(S) chat-completions client.
class HttpTransport : public ChatTransport {
 public:
  TransportReply post(const ProviderConfig& cfg, const std::string& api_key,
                      const std::string& json_body) override;
};

using Sleeper = std::function<void(double seconds)>;
Sleeper real_sleeper();

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct CompletionResult {
  std::string text;
  int attempts = 0;
  Usage usage;
};

/// Request body for an OpenAI-compatible chat-completions endpoint.
nlohmann::json build_request_body(const std::vector<ChatMessage>& messages, const ProviderConfig& cfg);

/// Assistant text and token usage from a response body. Throws
/// MalformedResponse when neither is present.
CompletionResult parse_completion_body(const std::string& body);

/// Retries transport failures, 408, 429 and 5xx with exponential backoff,
/// making at most 1 + max_retries attempts. Authentication failures
/// (401, 403) and other client errors are not retried.
CompletionResult complete_detailed(const std::vector<ChatMessage>& messages, const ProviderConfig& cfg,
                                   ChatTransport& transport, const Sleeper& sleep = real_sleeper());

std::string complete(const std::vector<ChatMessage>& messages, const ProviderConfig& cfg,
                     ChatTransport& transport, const Sleeper& sleep = real_sleeper());

/// Request-rate limiter shared by every caller using the same provider.
class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  TokenBucket(double rate_per_s, double burst);
  /// Seconds the caller must wait before its request may go out; the
  /// token is reserved immediately.
  double reserve(Clock::time_point now = Clock::now());

  static TokenBucket& shared_for(const ProviderConfig& cfg);

 private:
  std::mutex mu_;
  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
};

}  // namespace chiselforge
