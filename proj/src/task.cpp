#include "thinker/task.hpp"

#include <stdexcept>

namespace thinker::task {

namespace embedded {
extern const std::string_view k_fast;
extern const std::string_view k_verify;
extern const std::string_view k_slow;
extern const std::string_view k_summary;
}  // namespace embedded

namespace {

constexpr std::string_view k_question_slot = "{question}";
constexpr std::string_view k_length_limit = " Limit your response below 1000 words.";

std::string fill_question(std::string_view tmpl, std::string_view question) {
  std::string out;
  out.reserve(tmpl.size() + question.size());
  std::size_t from = 0;
  for (;;) {
    const std::size_t at = tmpl.find(k_question_slot, from);
    if (at == std::string_view::npos) break;
    out.append(tmpl.substr(from, at - from));
    out.append(question);
    from = at + k_question_slot.size();
  }
  out.append(tmpl.substr(from));
  return out;
}

}  // namespace

std::string_view stage_key(Stage s) {
  switch (s) {
    case Stage::FastThinking: return "fast";
    case Stage::Verification: return "verify";
    case Stage::SlowThinking: return "slow";
    case Stage::Summarization: return "summary";
  }
  return "fast";
}

std::optional<Stage> stage_from_key(std::string_view key) {
  for (Stage s : k_all_stages) {
    if (stage_key(s) == key) return s;
  }
  return std::nullopt;
}

std::string_view mode_key(Mode m) { return m == Mode::Training ? "training" : "inference"; }

std::optional<Mode> mode_from_key(std::string_view key) {
  if (key == "training") return Mode::Training;
  if (key == "inference") return Mode::Inference;
  return std::nullopt;
}

std::string_view finish_key(FinishReason f) { return f == FinishReason::Stop ? "stop" : "length"; }

std::string_view variant_key(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::FastOnly: return "fast-only";
    case Variant::SingleTurn: return "single-turn";
  }
  return "full";
}

void StageBudgets::validate() const {
  for (Stage s : k_all_stages) {
    if (budget(s) <= 0) {
      throw std::invalid_argument("budget for stage " + std::string(stage_key(s)) + " must be positive");
    }
    if (!(temp(s) >= 0.0)) {
      throw std::invalid_argument("temperature for stage " + std::string(stage_key(s)) + " must be >= 0");
    }
  }
  const double summary_temp = temp(Stage::Summarization);
  if (!(summary_temp > 0.0 && summary_temp <= 1.0)) {
    throw std::invalid_argument("summarization temperature must lie in (0, 1]");
  }
  if (single_turn_max_tokens <= 0) throw std::invalid_argument("single-turn budget must be positive");
  if (!(single_turn_temperature >= 0.0)) throw std::invalid_argument("single-turn temperature must be >= 0");
}

std::string_view template_text(Stage s) {
  switch (s) {
    case Stage::FastThinking: return embedded::k_fast;
    case Stage::Verification: return embedded::k_verify;
    case Stage::SlowThinking: return embedded::k_slow;
    case Stage::Summarization: return embedded::k_summary;
  }
  return embedded::k_fast;
}

std::string single_turn_template() {
  std::string t(embedded::k_fast);
  const auto at = t.find(k_length_limit);
  if (at != std::string::npos) t.erase(at, k_length_limit.size());
  return t;
}

std::string render_prompt(Stage stage, const dataset::QAItem& item) {
  return fill_question(template_text(stage), item.question);
}

std::string render_single_turn_prompt(const dataset::QAItem& item) {
  return fill_question(single_turn_template(), item.question);
}

Stage EpisodeState::stage() const {
  if (!stage_) throw TaskError("episode is terminal");
  return *stage_;
}

std::optional<std::size_t> EpisodeState::terminal_step() const {
  if (!terminal() || turns_.empty()) return std::nullopt;
  return turns_.size() - 1;
}

std::vector<Message> EpisodeState::messages() const {
  std::vector<Message> out;
  out.reserve(turns_.size() * 2 + 1);
  for (const auto& t : turns_) {
    out.push_back({"user", t.prompt});
    out.push_back({"assistant", t.response});
  }
  if (!terminal()) out.push_back({"user", pending_prompt_});
  return out;
}

int EpisodeState::pending_max_tokens() const {
  if (variant_ == Variant::SingleTurn) return budgets_.single_turn_max_tokens;
  return budgets_.budget(stage());
}

double EpisodeState::pending_temperature() const {
  if (variant_ == Variant::SingleTurn) return budgets_.single_turn_temperature;
  return budgets_.temp(stage());
}

EpisodeState begin_episode(const dataset::QAItem& item, Mode mode, const StageBudgets& budgets, Variant variant) {
  EpisodeState st;
  st.mode_ = mode;
  st.variant_ = variant;
  st.item_ = item;
  st.budgets_ = budgets;
  st.stage_ = Stage::FastThinking;
  st.pending_prompt_ = variant == Variant::SingleTurn ? render_single_turn_prompt(item)
                                                      : render_prompt(Stage::FastThinking, item);
  return st;
}

EpisodeState advance(EpisodeState st, const StageResponse& response) {
  if (st.terminal()) throw TaskError("cannot advance a terminal episode");
  const Stage current = *st.stage_;

  st.turns_.push_back(Turn{current, std::move(st.pending_prompt_), response.text, response.token_count,
                           response.finish_reason});
  st.pending_prompt_.clear();

  auto finish = [&st](Stage deciding) {
    st.stage_.reset();
    st.deciding_stage_ = deciding;
  };
  auto enter = [&st](Stage next) {
    st.stage_ = next;
    st.pending_prompt_ = render_prompt(next, st.item_);
  };
  // Ground truth is read only inside this helper, and only in Training mode.
  auto truth_matches = [&st](const std::optional<grading::ExtractedAnswer>& answer) {
    return answer.has_value() && grading::answers_equal(*answer, st.item_.answer);
  };

  switch (current) {
    case Stage::FastThinking:
      st.fast_answer_ = grading::extract_boxed(response.text);
      if (st.variant_ != Variant::Full) {
        finish(Stage::FastThinking);
      } else {
        enter(Stage::Verification);
      }
      break;

    case Stage::Verification: {
      st.verdict_ = grading::extract_verdict(response.text);
      const bool accept = st.mode_ == Mode::Inference ? *st.verdict_ == grading::Verdict::Yes
                                                      : truth_matches(st.fast_answer_);
      if (accept) {
        finish(Stage::FastThinking);
      } else {
        enter(Stage::SlowThinking);
      }
      break;
    }

    case Stage::SlowThinking:
      st.slow_answer_ = grading::extract_boxed(response.text);
      if (st.mode_ == Mode::Training && truth_matches(st.slow_answer_)) {
        enter(Stage::Summarization);
      } else {
        finish(Stage::SlowThinking);
      }
      break;

    case Stage::Summarization:
      st.summary_answer_ = grading::extract_boxed(response.text);
      finish(Stage::SlowThinking);
      break;
  }
  return st;
}

std::optional<grading::ExtractedAnswer> final_answer(const EpisodeState& state) {
  if (!state.terminal()) throw TaskError("final_answer requires a terminal episode");
  switch (*state.deciding_stage()) {
    case Stage::FastThinking: return state.fast_answer();
    case Stage::SlowThinking: return state.slow_answer();
    default: break;
  }
  return std::nullopt;
}

}  // namespace thinker::task
