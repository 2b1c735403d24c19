#include "thinker/transcript_io.hpp"

#include <ostream>

namespace thinker::io {
namespace {

using nlohmann::ordered_json;
using task::Stage;

ordered_json answer_json(const std::optional<grading::ExtractedAnswer>& a) {
  if (!a) return nullptr;
  return a->raw;
}

std::optional<double> reward_of(const rewards::StageRewards& r, Stage s) {
  switch (s) {
    case Stage::FastThinking: return r.fast;
    case Stage::Verification: return r.verify;
    case Stage::SlowThinking: return r.slow;
    case Stage::Summarization: return r.summary;
  }
  return std::nullopt;
}

ordered_json optional_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

ordered_json transcript_to_json(const rollout::Transcript& t, bool include_scoring) {
  const auto& st = t.state;
  ordered_json j;
  j["schema"] = k_transcript_schema;
  j["episode_id"] = t.episode_id;
  j["mode"] = task::mode_key(st.mode());
  j["variant"] = task::variant_key(st.variant());
  j["item_id"] = st.item().id;
  j["seed"] = t.seed;
  j["backend"] = t.backend_id;
  j["config_hash"] = t.config_hash;
  j["failed"] = t.failed;
  if (t.failed) j["error"] = t.error;

  ordered_json stages = ordered_json::array();
  for (const auto& turn : st.turns()) {
    ordered_json s;
    s["stage"] = task::stage_key(turn.stage);
    s["prompt"] = turn.prompt;
    s["response"] = turn.response;
    s["token_count"] = turn.token_count;
    s["finish_reason"] = task::finish_key(turn.finish_reason);
    s["truncated"] = turn.truncated();
    switch (turn.stage) {
      case Stage::FastThinking: s["extracted"] = answer_json(st.fast_answer()); break;
      case Stage::Verification:
        s["verdict"] = st.verdict() ? ordered_json(grading::to_string(*st.verdict())) : ordered_json(nullptr);
        break;
      case Stage::SlowThinking: s["extracted"] = answer_json(st.slow_answer()); break;
      case Stage::Summarization: s["extracted"] = answer_json(st.summary_answer()); break;
    }
    if (include_scoring && t.scored) s["reward"] = optional_json(reward_of(t.rewards, turn.stage));
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);

  if (st.terminal()) {
    j["final_stage"] = task::stage_key(*st.deciding_stage());
    j["final_answer"] = answer_json(task::final_answer(st));
  } else {
    j["final_stage"] = nullptr;
    j["final_answer"] = nullptr;
  }

  if (include_scoring) {
    j["scored"] = t.scored;
    j["summary_logprob"] = optional_json(t.summary_logprob);
    j["summary_logprob_missing"] = t.summary_logprob_missing;
    if (t.scored) {
      j["fast_correct"] = t.fast_correct.value_or(false);
      j["correct"] = t.correct.value_or(false);
      // Returns are constant within a stage, so one value per stage suffices.
      ordered_json returns = ordered_json::array();
      const auto traj = rollout::trajectory_from(t);
      for (std::size_t i = 0; i < traj.stages.size(); ++i) {
        returns.push_back({{"stage", task::stage_key(traj.stages[i])},
                           {"tokens", traj.token_counts[i]},
                           {"return", traj.rewards[i]}});
      }
      j["returns"] = std::move(returns);
    }
  }
  return j;
}

std::string transcript_line(const rollout::Transcript& t, bool include_scoring) {
  return transcript_to_json(t, include_scoring).dump();
}

ordered_json report_to_json(const eval::BenchmarkReport& r, const std::string& config_hash) {
  ordered_json j;
  j["schema"] = k_report_schema;
  j["config_hash"] = config_hash;
  j["mode"] = eval::eval_mode_key(r.mode);
  j["k"] = r.k;
  j["accuracy"] = r.accuracy;
  j["standard_error"] = optional_json(r.standard_error);
  j["fast_accuracy"] = r.fast_accuracy;
  j["slow_rate"] = r.slow_rate;
  ordered_json stage_tokens;
  for (Stage s : task::k_all_stages) stage_tokens[std::string(task::stage_key(s))] = r.mean_stage_tokens[task::index_of(s)];
  j["mean_stage_tokens"] = std::move(stage_tokens);
  j["mean_total_tokens"] = r.mean_total_tokens;
  j["mean_reflections"] = r.mean_reflections;
  j["reflections_per_1k_tokens"] = r.reflections_per_1k_tokens;
  j["failed_samples"] = r.failed_samples;
  j["excluded"] = r.excluded;
  ordered_json questions = ordered_json::array();
  for (const auto& q : r.questions) {
    questions.push_back({{"item_id", q.item_id},
                         {"samples", q.samples},
                         {"failed", q.failed},
                         {"correct", q.correct},
                         {"fast_correct", q.fast_correct},
                         {"accuracy", q.accuracy}});
  }
  j["questions"] = std::move(questions);
  return j;
}

void TranscriptWriter::write(const rollout::Transcript& t, bool include_scoring) {
  const std::string line = transcript_line(t, include_scoring);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
}

}  // namespace thinker::io
