#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "thinker/grading.hpp"

namespace thinker::rewards {

enum class TrailingEstimator { BatchMean, Ema };

struct RewardConfig {
  /// Weight of the summary log-probability term.
  double c = 1e-3;
  /// Summaries shorter than this (in tokens) earn exactly 0.
  int min_summary_tokens = 300;
  TrailingEstimator estimator = TrailingEstimator::BatchMean;
  double ema_decay = 0.9;
  /// Batches smaller than this fall back to the EMA update.
  std::size_t min_batch_for_mean = 8;
  /// Use the mean per-token log-probability instead of the sum.
  bool per_token_mean_logprob = false;

  /// Throws std::invalid_argument on c < 0, negative min length, or a
  /// decay outside (0, 1).
  void validate() const;

  bool operator==(const RewardConfig&) const = default;
};

/// Running estimate of Fast Thinking accuracy, used to class-balance the
/// verification reward. Starts uninformative at 0.5.
struct TrailingAccuracy {
  double p = 0.5;
  std::size_t count = 0;

  bool operator==(const TrailingAccuracy&) const = default;
};

/// Per-stage rewards; a field is present iff that stage executed and has
/// been scored.
struct StageRewards {
  std::optional<double> fast;
  std::optional<double> verify;
  std::optional<double> slow;
  std::optional<double> summary;

  bool operator==(const StageRewards&) const = default;
};

/// 1 when the answer is present and equals the truth, else 0.
double reward_fast(const std::optional<grading::ExtractedAnswer>& fast_answer, std::string_view truth);
double reward_slow(const std::optional<grading::ExtractedAnswer>& slow_answer, std::string_view truth);

/// Class-balanced verification reward:
///   fast correct:   (1 - p) * [verdict == Yes]
///   fast incorrect:  p      * [verdict == No]
/// Malformed verdicts earn 0. Throws std::invalid_argument if p is outside [0, 1].
double reward_verify(bool fast_correct, grading::Verdict verdict, const TrailingAccuracy& trailing);

/// [summary answer == slow answer] + c * logprob, gated to 0 when the
/// response is shorter than cfg.min_summary_tokens. `logprob_sum` is the
/// summed token log-probability of the summary under the Fast Thinking
/// prompt; must be <= 0 (std::invalid_argument otherwise).
double reward_summary(const std::optional<grading::ExtractedAnswer>& summary_answer,
                      const std::optional<grading::ExtractedAnswer>& slow_answer, double logprob_sum,
                      int response_tokens, const RewardConfig& cfg);

/// Folds one batch of fast rewards (each 0 or 1) into the tracker:
/// batch mean when the estimator is BatchMean and the batch is large
/// enough, otherwise p <- decay * p + (1 - decay) * mean. Throws
/// std::invalid_argument on an empty batch.
TrailingAccuracy update_trailing(const TrailingAccuracy& tracker, std::span<const double> batch_fast_rewards,
                                 const RewardConfig& cfg);

}  // namespace thinker::rewards
