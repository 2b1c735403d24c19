#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinker/backend.hpp"
#include "thinker/dataset.hpp"
#include "thinker/rewards.hpp"
#include "thinker/task.hpp"

namespace thinker::rollout {

/// A finished (or failed) episode plus its scoring.
struct Transcript {
  std::string episode_id;
  std::uint64_t seed = 0;
  std::string backend_id;
  std::string config_hash;
  task::EpisodeState state;

  bool failed = false;
  std::string error;

  /// Summed log-probability of the summary under the Fast Thinking prompt;
  /// absent when Summarization did not run or the backend cannot score.
  std::optional<double> summary_logprob;
  bool summary_logprob_missing = false;

  /// Filled by score_transcript, which is the only place ground truth is
  /// consulted outside Training-mode routing.
  bool scored = false;
  rewards::StageRewards rewards;
  std::optional<bool> fast_correct;
  std::optional<bool> correct;

  int total_tokens() const;
  int stage_tokens(task::Stage s) const;
};

/// Runs one episode to its terminal stage. Each request carries the
/// stage's budget and temperature; Slow Thinking responses are prefilled
/// with the think marker. When Summarization runs, the summary is scored
/// against the Fast Thinking prompt alone. Backend failures mark the
/// transcript failed instead of throwing.
Transcript run_episode(backend::Backend& backend, const dataset::QAItem& item, task::Mode mode,
                       const task::StageBudgets& budgets, std::uint64_t seed,
                       task::Variant variant = task::Variant::Full);

/// Computes every stage reward and the correctness flags from ground truth.
/// Missing summary log-probabilities contribute 0 to the summary reward.
void score_transcript(Transcript& transcript, const rewards::TrailingAccuracy& trailing,
                      const rewards::RewardConfig& cfg);

struct BatchConfig {
  task::StageBudgets budgets;
  rewards::RewardConfig rewards;
  std::size_t parallelism = 1;
  std::size_t samples_per_prompt = 1;
};

struct BatchStats {
  std::size_t episodes = 0;
  std::size_t failed = 0;
  double fast_accuracy = 0.0;
  double final_accuracy = 0.0;
  double mean_total_tokens = 0.0;
  /// Mean over episodes that executed the stage.
  std::array<double, 4> mean_stage_tokens{};
};

struct RolloutBatch {
  std::vector<Transcript> transcripts;
  /// Tracker after folding in this batch; its p is the value used by
  /// every verification reward in the batch.
  rewards::TrailingAccuracy trailing;
  BatchStats stats;
};

/// Seed of episode `index` within a run seeded by `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t index);

/// Runs `fn(i)` for i in [0, n) on up to `parallelism` threads.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

/// Runs items x samples_per_prompt episodes concurrently, then at a single
/// barrier updates the trailing accuracy from the batch's fast rewards
/// (failed episodes excluded) and scores every transcript with it.
/// Transcript order is item-major and independent of parallelism.
/// Throws backend::BackendError when every episode failed.
RolloutBatch run_batch(backend::Backend& backend, const std::vector<dataset::QAItem>& items, task::Mode mode,
                       const BatchConfig& cfg, std::uint64_t seed, const rewards::TrailingAccuracy& trailing = {});

BatchStats summarize(const std::vector<Transcript>& transcripts);

class TrajectoryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Token-level view of one episode for credit assignment.
struct Trajectory {
  task::Mode mode = task::Mode::Training;
  std::vector<task::Stage> stages;
  std::vector<int> token_counts;
  std::vector<double> rewards;

  /// Exclusive end offset of each stage in the concatenated token stream.
  std::vector<std::size_t> boundaries() const;
  std::size_t total_tokens() const;
  /// Throws TrajectoryError unless sizes agree and every stage has at
  /// least one token.
  void validate() const;
};

/// Trajectory of a scored transcript. Empty responses count as one token
/// (the end-of-sequence token a trainer would still see).
Trajectory trajectory_from(const Transcript& transcript);

/// Reward of each stage placed on that stage's last token, 0 elsewhere.
std::vector<double> per_token_rewards(const Trajectory& traj);

/// Per-token returns with discount 1 inside a stage and 0 across stage
/// boundaries: every token of stage s gets R_s.
std::vector<double> compute_stage_returns(const Trajectory& traj);

/// GAE with hard resets at stage boundaries:
///   delta_t = r_t + gamma * V_{t+1} - V_t, with V_{t+1} = 0 at a stage end
///   A_t     = delta_t + gamma * lambda * A_{t+1}, with A = 0 past a stage end
/// `boundaries` are exclusive stage end offsets, strictly increasing, the
/// last equal to rewards.size(). Throws TrajectoryError on mismatch.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const std::size_t> boundaries, double gamma = 1.0, double lambda = 1.0);

}  // namespace thinker::rollout
