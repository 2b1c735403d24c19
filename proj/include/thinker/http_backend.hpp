#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "thinker/backend.hpp"

namespace thinker::backend {

struct HttpConfig {
  /// Scheme, host and optional port, e.g. "http://127.0.0.1:8000".
  std::string base_url = "http://127.0.0.1:8000";
  /// Path prefix in front of /chat/completions and /completions.
  std::string api_prefix = "/v1";
  std::string model = "default";
  double timeout_s = 600.0;
  int max_in_flight = 16;
  /// Name of the environment variable holding the bearer token; empty
  /// disables authentication.
  std::string api_key_env = "THINKER_API_KEY";
  /// Attempts per call (first try included).
  int max_attempts = 3;
  double backoff_initial_s = 0.5;
  /// "none" or "echo" (prompt log-probs via the completions endpoint).
  std::string scoring = "none";

  void validate() const;
};

/// Chat-completions client. Request body:
///   {model, messages:[{role, content}], max_tokens, temperature, seed?}
/// The reply is read from choices[0].message.content, usage.completion_tokens
/// and choices[0].finish_reason. Transport errors and 5xx/429 replies are
/// retried with exponential backoff; other failures throw BackendError.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpConfig cfg, const Tokenizer& tokenizer = default_tokenizer());
  ~HttpBackend() override;

  HttpBackend(const HttpBackend&) = delete;
  HttpBackend& operator=(const HttpBackend&) = delete;

  std::string id() const override;
  GenerationResult generate(const GenerationRequest& request) override;

  /// With scoring = "echo": POSTs {prompt: flattened dialogue + completion,
  /// echo: true, logprobs: 0, max_tokens: 0} to /completions and sums the
  /// log-probs of tokens whose text offset falls inside the completion.
  /// Otherwise throws CapabilityAbsent.
  double score_logprob(const std::vector<Message>& prompt, std::string_view completion) override;
  bool can_score() const override { return cfg_.scoring == "echo"; }

  const HttpConfig& config() const { return cfg_; }

 private:
  std::string post_json(const std::string& path, const std::string& body);

  HttpConfig cfg_;
  const Tokenizer& tokenizer_;
  std::optional<std::string> api_key_;
  std::counting_semaphore<1 << 16> in_flight_;
};

/// Flattens a dialogue into plain text for the echo scoring route.
std::string flatten_dialogue(const std::vector<Message>& messages);

}  // namespace thinker::backend
