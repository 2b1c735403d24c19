#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thinker/dataset.hpp"
#include "thinker/task.hpp"

namespace thinker::backend {

using task::FinishReason;
using task::Message;
using task::Stage;

/// Which engine step issued a request. Never sent on the wire; local
/// backends use it to route fixtures and simulate behavior.
struct RequestTag {
  /// Stage name ("fast", "verify", "slow", "summary") or "single-turn".
  std::string key;
  dataset::QAItem item;
  std::uint64_t episode_seed = 0;
};

inline constexpr std::string_view k_single_turn_key = "single-turn";

struct GenerationRequest {
  /// Full dialogue so far; roles alternate starting with "user" and the
  /// last message is the pending user prompt.
  std::vector<Message> messages;
  int max_tokens = 0;
  double temperature = 1.0;
  std::optional<std::int64_t> seed;
  /// Text the assistant reply is forced to start with (sent as a prefill).
  std::string assistant_prefix;
  std::optional<RequestTag> tag;

  /// Throws std::invalid_argument when max_tokens <= 0, messages are
  /// empty, or roles do not alternate user/assistant from a user turn.
  void validate() const;
};

struct GenerationResult {
  /// Generated continuation (excluding assistant_prefix).
  std::string text;
  int token_count = 0;
  FinishReason finish_reason = FinishReason::Stop;
  std::optional<double> logprob_sum;

  task::StageResponse as_stage_response(std::string_view prefix = {}) const;
};

/// Any transport, timeout, or protocol failure talking to a generator.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The backend cannot score completions (no log-probability support).
class CapabilityAbsent : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Mock backend has no fixture for a (stage, item) pair.
class FixtureMissing : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Counts tokens for budget enforcement when a server reports no usage.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual int count(std::string_view text) const = 0;
  /// Longest prefix of `text` holding at most `max_tokens` tokens.
  virtual std::string_view truncate(std::string_view text, int max_tokens) const = 0;
};

/// Approximate tokenizer: one token per whitespace-delimited word.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  int count(std::string_view text) const override;
  std::string_view truncate(std::string_view text, int max_tokens) const override;
};

const Tokenizer& default_tokenizer();

/// Cuts `text` to the request budget and fills token_count and
/// finish_reason accordingly.
GenerationResult enforce_budget(std::string text, int max_tokens, const Tokenizer& tokenizer);

/// The policy slot: anything that turns a dialogue into a reply.
/// Implementations must tolerate concurrent generate() calls.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;

  virtual GenerationResult generate(const GenerationRequest& request) = 0;

  /// Sum of token log-probabilities of `completion` given `prompt`.
  /// Default: no scoring support.
  virtual double score_logprob(const std::vector<Message>& prompt, std::string_view completion);

  virtual bool can_score() const { return false; }
};

/// Deterministic table-driven backend for tests. Replies are looked up
/// by (request tag key, item id); every request is appended to a log.
class MockBackend final : public Backend {
 public:
  struct Call {
    std::string key;
    std::string item_id;
    int max_tokens = 0;
    double temperature = 0.0;
    std::vector<Message> messages;
  };

  MockBackend() = default;

  void set_fixture(std::string_view key, std::string_view item_id, std::string text);
  /// Value returned by score_logprob for non-empty completions.
  void set_logprob(std::optional<double> value) { logprob_ = value; }

  /// Loads fixtures from JSONL records {"key", "item_id", "text"}.
  void load_fixtures(const std::string& path);

  std::string id() const override { return "mock"; }
  GenerationResult generate(const GenerationRequest& request) override;
  double score_logprob(const std::vector<Message>& prompt, std::string_view completion) override;
  bool can_score() const override { return logprob_.has_value(); }

  std::vector<Call> calls() const;
  void clear_calls();

 private:
  std::map<std::pair<std::string, std::string>, std::string, std::less<>> fixtures_;
  std::optional<double> logprob_;
  mutable std::mutex mu_;
  std::vector<Call> calls_;
};

/// Parameters of the scripted policy that stands in for a trained agent.
struct PolicyParams {
  /// P(fast answer correct).
  double p_fast = 0.5;
  /// P(Yes | fast answer correct).
  double t_p = 1.0;
  /// P(No | fast answer incorrect).
  double t_n = 1.0;
  /// P(slow answer correct).
  double p_slow = 0.5;
  /// Overrides p_slow when the fast answer was correct but rejected.
  std::optional<double> p_slow_after_false_reject;
  /// P(correct) for the single-turn baseline; defaults to p_slow.
  std::optional<double> p_single;

  /// Exact response lengths (whitespace tokens) per stage; the single-turn
  /// baseline uses the slow length.
  int fast_tokens = 40;
  int verify_tokens = 20;
  int slow_tokens = 120;
  int summary_tokens = 350;

  /// Log-probability charged per completion token by score_logprob.
  double logprob_per_token = -0.5;

  /// Throws std::invalid_argument on probabilities outside [0, 1] or
  /// non-positive lengths.
  void validate() const;

  bool operator==(const PolicyParams&) const = default;
};

/// Deterministic wrong answer for `truth`: truth + 1 when numeric,
/// otherwise truth + "_wrong".
std::string perturb_answer(std::string_view truth);

/// Text the scripted policy emits for one stage. Each stage draws a
/// single uniform u from a stream seeded by (rng_seed, stage) and
/// succeeds iff u < probability, so outcomes are monotone in the
/// parameters under a fixed seed. Verification says No to a wrong answer
/// iff u >= 1 - t_n.
///
/// `fast_was_correct` and `slow_answer` are read for Verification and
/// Summarization respectively.
std::string scripted_respond(std::string_view key, const dataset::QAItem& item, const PolicyParams& params,
                             std::uint64_t rng_seed, bool fast_was_correct = false,
                             std::string_view slow_answer = {});

/// Backend wrapper around scripted_respond. Reads the fast answer back out
/// of the dialogue, so it works with any driver. Stateless per call.
class ScriptedPolicy final : public Backend {
 public:
  explicit ScriptedPolicy(PolicyParams params);

  const PolicyParams& params() const { return params_; }

  std::string id() const override { return "scripted"; }
  GenerationResult generate(const GenerationRequest& request) override;
  double score_logprob(const std::vector<Message>& prompt, std::string_view completion) override;
  bool can_score() const override { return true; }

 private:
  PolicyParams params_;
};

}  // namespace thinker::backend
