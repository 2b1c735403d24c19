#include "thinker/rollout.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "thinker/kernels.hpp"
#include "thinker/seed.hpp"

namespace thinker::rollout {
namespace {

using task::Stage;

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string request_key(const task::EpisodeState& st) {
  if (st.variant() == task::Variant::SingleTurn) return std::string(backend::k_single_turn_key);
  return std::string(task::stage_key(st.stage()));
}

const task::Turn* find_turn(const task::EpisodeState& st, Stage s) {
  for (const auto& t : st.turns()) {
    if (t.stage == s) return &t;
  }
  return nullptr;
}

double mean_or_zero(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

void check_boundaries(std::span<const std::size_t> boundaries, std::size_t n) {
  if (boundaries.empty()) throw TrajectoryError("trajectory has no stages");
  std::size_t prev = 0;
  for (std::size_t b : boundaries) {
    if (b <= prev) throw TrajectoryError("stage boundaries must be strictly increasing");
    prev = b;
  }
  if (boundaries.back() != n) throw TrajectoryError("last stage boundary must equal the token count");
}

}  // namespace

int Transcript::total_tokens() const {
  int n = 0;
  for (const auto& t : state.turns()) n += t.token_count;
  return n;
}

int Transcript::stage_tokens(Stage s) const {
  const task::Turn* t = find_turn(state, s);
  return t ? t->token_count : 0;
}

Transcript run_episode(backend::Backend& backend, const dataset::QAItem& item, task::Mode mode,
                       const task::StageBudgets& budgets, std::uint64_t seed, task::Variant variant) {
  Transcript out;
  out.seed = seed;
  out.episode_id = item.id + "@" + hex16(seed);
  out.backend_id = backend.id();
  out.state = task::begin_episode(item, mode, budgets, variant);

  try {
    while (!out.state.terminal()) {
      const Stage stage = out.state.stage();
      backend::GenerationRequest req;
      req.messages = out.state.messages();
      req.max_tokens = out.state.pending_max_tokens();
      req.temperature = out.state.pending_temperature();
      req.seed = static_cast<std::int64_t>(derive_seed(seed, {task::index_of(stage)}) >> 1);
      if (stage == Stage::SlowThinking) req.assistant_prefix = std::string(task::k_think_open);
      req.tag = backend::RequestTag{request_key(out.state), item, seed};

      const auto result = backend.generate(req);
      out.state = task::advance(std::move(out.state), result.as_stage_response(req.assistant_prefix));
    }

    if (const task::Turn* summary = find_turn(out.state, Stage::Summarization)) {
      if (backend.can_score()) {
        const std::vector<task::Message> prompt = {{"user", task::render_prompt(Stage::FastThinking, item)}};
        try {
          out.summary_logprob = backend.score_logprob(prompt, summary->response);
        } catch (const backend::CapabilityAbsent&) {
          out.summary_logprob_missing = true;
        }
      } else {
        out.summary_logprob_missing = true;
      }
    }
  } catch (const backend::BackendError& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

void score_transcript(Transcript& t, const rewards::TrailingAccuracy& trailing, const rewards::RewardConfig& cfg) {
  t.rewards = {};
  t.fast_correct.reset();
  t.correct.reset();
  t.scored = false;
  if (t.failed || !t.state.terminal()) return;

  const auto& st = t.state;
  const std::string& truth = st.item().answer;

  if (find_turn(st, Stage::FastThinking)) {
    t.rewards.fast = rewards::reward_fast(st.fast_answer(), truth);
    t.fast_correct = *t.rewards.fast == 1.0;
  }
  if (st.verdict()) {
    t.rewards.verify = rewards::reward_verify(t.fast_correct.value_or(false), *st.verdict(), trailing);
  }
  if (find_turn(st, Stage::SlowThinking)) t.rewards.slow = rewards::reward_slow(st.slow_answer(), truth);
  if (const task::Turn* summary = find_turn(st, Stage::Summarization)) {
    t.rewards.summary = rewards::reward_summary(st.summary_answer(), st.slow_answer(), t.summary_logprob.value_or(0.0),
                                                summary->token_count, cfg);
  }

  const auto final = task::final_answer(st);
  t.correct = final && grading::answers_equal(*final, truth);
  t.scored = true;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, {index}); }

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(parallelism, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

RolloutBatch run_batch(backend::Backend& backend, const std::vector<dataset::QAItem>& items, task::Mode mode,
                       const BatchConfig& cfg, std::uint64_t seed, const rewards::TrailingAccuracy& trailing) {
  if (items.empty()) throw std::invalid_argument("run_batch needs at least one item");
  if (cfg.samples_per_prompt == 0) throw std::invalid_argument("samples_per_prompt must be positive");
  cfg.budgets.validate();
  cfg.rewards.validate();

  const std::size_t n = items.size() * cfg.samples_per_prompt;
  RolloutBatch batch;
  batch.transcripts.resize(n);
  parallel_for(n, cfg.parallelism, [&](std::size_t i) {
    batch.transcripts[i] =
        run_episode(backend, items[i / cfg.samples_per_prompt], mode, cfg.budgets, episode_seed(seed, i));
  });

  // Barrier: the trailing accuracy is fixed before any verify reward is computed.
  std::vector<double> fast_rewards;
  fast_rewards.reserve(n);
  for (const auto& t : batch.transcripts) {
    if (t.failed) continue;
    fast_rewards.push_back(rewards::reward_fast(t.state.fast_answer(), t.state.item().answer));
  }
  if (fast_rewards.empty()) {
    throw backend::BackendError("every episode in the batch failed; first error: " + batch.transcripts.front().error);
  }
  batch.trailing = rewards::update_trailing(trailing, fast_rewards, cfg.rewards);

  for (auto& t : batch.transcripts) score_transcript(t, batch.trailing, cfg.rewards);
  batch.stats = summarize(batch.transcripts);
  return batch;
}

BatchStats summarize(const std::vector<Transcript>& transcripts) {
  BatchStats s;
  s.episodes = transcripts.size();
  std::size_t ok = 0, fast_ok = 0, final_ok = 0;
  double total_tokens = 0.0;
  std::array<double, 4> stage_sum{};
  std::array<std::size_t, 4> stage_n{};
  for (const auto& t : transcripts) {
    if (t.failed) {
      ++s.failed;
      continue;
    }
    ++ok;
    if (t.fast_correct.value_or(false)) ++fast_ok;
    if (t.correct.value_or(false)) ++final_ok;
    total_tokens += t.total_tokens();
    for (const auto& turn : t.state.turns()) {
      stage_sum[task::index_of(turn.stage)] += turn.token_count;
      ++stage_n[task::index_of(turn.stage)];
    }
  }
  s.fast_accuracy = mean_or_zero(static_cast<double>(fast_ok), ok);
  s.final_accuracy = mean_or_zero(static_cast<double>(final_ok), ok);
  s.mean_total_tokens = mean_or_zero(total_tokens, ok);
  for (std::size_t i = 0; i < 4; ++i) s.mean_stage_tokens[i] = mean_or_zero(stage_sum[i], stage_n[i]);
  return s;
}

std::vector<std::size_t> Trajectory::boundaries() const {
  std::vector<std::size_t> out;
  out.reserve(token_counts.size());
  std::size_t end = 0;
  for (int n : token_counts) {
    end += static_cast<std::size_t>(n);
    out.push_back(end);
  }
  return out;
}

std::size_t Trajectory::total_tokens() const {
  std::size_t n = 0;
  for (int c : token_counts) n += static_cast<std::size_t>(c);
  return n;
}

void Trajectory::validate() const {
  if (stages.empty()) throw TrajectoryError("trajectory has no stages");
  if (token_counts.size() != stages.size() || rewards.size() != stages.size()) {
    throw TrajectoryError("trajectory stage, token count and reward lists differ in length");
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (token_counts[i] < 1) throw TrajectoryError("every stage needs at least one token");
    if (i > 0 && task::index_of(stages[i]) <= task::index_of(stages[i - 1])) {
      throw TrajectoryError("stages must appear in dialogue order without repeats");
    }
  }
}

Trajectory trajectory_from(const Transcript& transcript) {
  if (!transcript.scored) throw TrajectoryError("transcript " + transcript.episode_id + " is not scored");
  Trajectory traj;
  traj.mode = transcript.state.mode();
  for (const auto& turn : transcript.state.turns()) {
    std::optional<double> r;
    switch (turn.stage) {
      case Stage::FastThinking: r = transcript.rewards.fast; break;
      case Stage::Verification: r = transcript.rewards.verify; break;
      case Stage::SlowThinking: r = transcript.rewards.slow; break;
      case Stage::Summarization: r = transcript.rewards.summary; break;
    }
    if (!r) throw TrajectoryError("executed stage " + std::string(task::stage_key(turn.stage)) + " has no reward");
    traj.stages.push_back(turn.stage);
    traj.token_counts.push_back(std::max(turn.token_count, 1));
    traj.rewards.push_back(*r);
  }
  traj.validate();
  return traj;
}

std::vector<double> per_token_rewards(const Trajectory& traj) {
  traj.validate();
  std::vector<double> out(traj.total_tokens(), 0.0);
  const auto ends = traj.boundaries();
  for (std::size_t s = 0; s < ends.size(); ++s) out[ends[s] - 1] = traj.rewards[s];
  return out;
}

std::vector<double> compute_stage_returns(const Trajectory& traj) {
  traj.validate();
  std::vector<double> out;
  out.reserve(traj.total_tokens());
  for (std::size_t s = 0; s < traj.stages.size(); ++s) out.insert(out.end(), traj.token_counts[s], traj.rewards[s]);
  return out;
}

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const std::size_t> boundaries, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n) throw TrajectoryError("rewards and values differ in length");
  check_boundaries(boundaries, n);

  // V_{t+1}, zeroed on each stage's last token.
  std::vector<double> next_values(n, 0.0);
  std::size_t stage = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t + 1 == boundaries[stage]) {
      ++stage;
    } else {
      next_values[t] = values[t + 1];
    }
  }

  std::vector<double> adv(n);
  kernels::td_residuals(rewards, values, next_values, gamma, adv);

  const double decay = gamma * lambda;
  std::size_t b = boundaries.size();
  for (std::size_t t = n; t-- > 0;) {
    const bool stage_end = b > 0 && t + 1 == boundaries[b - 1];
    if (stage_end) {
      --b;
    } else {
      adv[t] = adv[t] + decay * adv[t + 1];
    }
  }
  return adv;
}

}  // namespace thinker::rollout
