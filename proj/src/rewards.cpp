#include "thinker/rewards.hpp"

#include <numeric>
#include <stdexcept>

namespace thinker::rewards {

void RewardConfig::validate() const {
  if (!(c >= 0.0)) throw std::invalid_argument("rewards.c must be >= 0");
  if (min_summary_tokens < 0) throw std::invalid_argument("rewards.min_summary_tokens must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw std::invalid_argument("rewards.ema_decay must lie in (0, 1)");
}

double reward_fast(const std::optional<grading::ExtractedAnswer>& fast_answer, std::string_view truth) {
  return fast_answer && grading::answers_equal(*fast_answer, truth) ? 1.0 : 0.0;
}

double reward_slow(const std::optional<grading::ExtractedAnswer>& slow_answer, std::string_view truth) {
  return reward_fast(slow_answer, truth);
}

double reward_verify(bool fast_correct, grading::Verdict verdict, const TrailingAccuracy& trailing) {
  const double p = trailing.p;
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("trailing accuracy must lie in [0, 1]");
  if (fast_correct) return verdict == grading::Verdict::Yes ? 1.0 - p : 0.0;
  return verdict == grading::Verdict::No ? p : 0.0;
}

double reward_summary(const std::optional<grading::ExtractedAnswer>& summary_answer,
                      const std::optional<grading::ExtractedAnswer>& slow_answer, double logprob_sum,
                      int response_tokens, const RewardConfig& cfg) {
  if (logprob_sum > 0.0) throw std::invalid_argument("summary log-probability must be <= 0");
  if (response_tokens < cfg.min_summary_tokens) return 0.0;

  const double match = summary_answer && slow_answer && grading::answers_equal(*summary_answer, *slow_answer);
  double logprob = logprob_sum;
  if (cfg.per_token_mean_logprob) logprob = response_tokens > 0 ? logprob_sum / response_tokens : 0.0;
  return match + cfg.c * logprob;
}

TrailingAccuracy update_trailing(const TrailingAccuracy& tracker, std::span<const double> batch_fast_rewards,
                                 const RewardConfig& cfg) {
  if (batch_fast_rewards.empty()) throw std::invalid_argument("trailing accuracy update needs a nonempty batch");
  const double mean = std::accumulate(batch_fast_rewards.begin(), batch_fast_rewards.end(), 0.0) /
                      static_cast<double>(batch_fast_rewards.size());
  TrailingAccuracy next;
  next.count = tracker.count + batch_fast_rewards.size();
  if (cfg.estimator == TrailingEstimator::BatchMean && batch_fast_rewards.size() >= cfg.min_batch_for_mean) {
    next.p = mean;
  } else {
    next.p = cfg.ema_decay * tracker.p + (1.0 - cfg.ema_decay) * mean;
  }
  return next;
}

}  // namespace thinker::rewards
