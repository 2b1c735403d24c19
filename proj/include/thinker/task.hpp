#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinker/dataset.hpp"
#include "thinker/grading.hpp"

namespace thinker::task {

/// The four stages in dialogue order. Stages are never revisited.
enum class Stage { FastThinking = 0, Verification = 1, SlowThinking = 2, Summarization = 3 };

inline constexpr std::array<Stage, 4> k_all_stages = {
    Stage::FastThinking, Stage::Verification, Stage::SlowThinking, Stage::Summarization};

constexpr std::size_t index_of(Stage s) { return static_cast<std::size_t>(s); }

/// Short machine name: "fast", "verify", "slow", "summary".
std::string_view stage_key(Stage s);
std::optional<Stage> stage_from_key(std::string_view key);

/// Training routes on ground truth after Verification; Inference on the
/// model's own verdict.
enum class Mode { Training, Inference };

std::string_view mode_key(Mode m);
std::optional<Mode> mode_from_key(std::string_view key);

enum class FinishReason { Stop, Length };

std::string_view finish_key(FinishReason f);

/// Full runs all four stages per the transition table. FastOnly stops
/// after Fast Thinking with the fast answer final. SingleTurn is the
/// one-prompt baseline: one turn with the single-turn prompt and budget.
enum class Variant { Full, FastOnly, SingleTurn };

std::string_view variant_key(Variant v);

/// Per-stage generation budgets (tokens) and sampling temperatures.
struct StageBudgets {
  std::array<int, 4> max_tokens = {1000, 2000, 6000, 1000};
  std::array<double, 4> temperature = {1.0, 1.0, 1.0, 0.6};
  /// Single-turn baseline (one prompt, no stages).
  int single_turn_max_tokens = 8000;
  double single_turn_temperature = 1.0;

  int budget(Stage s) const { return max_tokens[index_of(s)]; }
  double temp(Stage s) const { return temperature[index_of(s)]; }

  /// Throws std::invalid_argument unless every budget is positive and
  /// the summarization temperature lies in (0, 1].
  void validate() const;

  bool operator==(const StageBudgets&) const = default;
};

/// Prompt templates exactly as shipped in resources/templates/v1.
std::string_view template_text(Stage s);

/// The Slow Thinking response opens with this marker; it is sent as an
/// assistant prefill and kept at the start of the recorded response.
inline constexpr std::string_view k_think_open = "<think>";

/// Fast Thinking template without its length-limit sentence.
std::string single_turn_template();

/// Instantiates the stage template for `item`. History does not enter the
/// prompt text itself; prior turns travel as dialogue messages.
std::string render_prompt(Stage stage, const dataset::QAItem& item);
std::string render_single_turn_prompt(const dataset::QAItem& item);

/// What a generator returned for one stage.
struct StageResponse {
  std::string text;
  int token_count = 0;
  FinishReason finish_reason = FinishReason::Stop;
};

struct Turn {
  Stage stage;
  std::string prompt;
  std::string response;
  int token_count = 0;
  FinishReason finish_reason = FinishReason::Stop;

  bool truncated() const { return finish_reason == FinishReason::Length; }
  bool operator==(const Turn&) const = default;
};

struct Message {
  std::string role;
  std::string content;

  bool operator==(const Message&) const = default;
};

class TaskError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The evolving four-stage dialogue for one question.
class EpisodeState {
 public:
  Mode mode() const { return mode_; }
  Variant variant() const { return variant_; }
  const dataset::QAItem& item() const { return item_; }
  const StageBudgets& budgets() const { return budgets_; }

  bool terminal() const { return !stage_.has_value(); }
  /// Current stage; throws TaskError once terminal.
  Stage stage() const;
  /// Prompt awaiting a response; empty once terminal.
  const std::string& pending_prompt() const { return pending_prompt_; }

  const std::vector<Turn>& turns() const { return turns_; }

  const std::optional<grading::ExtractedAnswer>& fast_answer() const { return fast_answer_; }
  const std::optional<grading::Verdict>& verdict() const { return verdict_; }
  const std::optional<grading::ExtractedAnswer>& slow_answer() const { return slow_answer_; }
  const std::optional<grading::ExtractedAnswer>& summary_answer() const { return summary_answer_; }

  /// Stage whose answer became final; set iff terminal.
  const std::optional<Stage>& deciding_stage() const { return deciding_stage_; }
  /// Index of the last turn (T of the multi-turn objective); set iff terminal.
  std::optional<std::size_t> terminal_step() const;

  /// Dialogue so far plus the pending user prompt, ready for a generator.
  std::vector<Message> messages() const;

  /// Budget and temperature for the pending turn.
  int pending_max_tokens() const;
  double pending_temperature() const;

 private:
  friend EpisodeState begin_episode(const dataset::QAItem&, Mode, const StageBudgets&, Variant);
  friend EpisodeState advance(EpisodeState, const StageResponse&);

  Mode mode_ = Mode::Inference;
  Variant variant_ = Variant::Full;
  dataset::QAItem item_;
  StageBudgets budgets_;
  std::optional<Stage> stage_;
  std::string pending_prompt_;
  std::vector<Turn> turns_;
  std::optional<grading::ExtractedAnswer> fast_answer_;
  std::optional<grading::Verdict> verdict_;
  std::optional<grading::ExtractedAnswer> slow_answer_;
  std::optional<grading::ExtractedAnswer> summary_answer_;
  std::optional<Stage> deciding_stage_;
};

EpisodeState begin_episode(const dataset::QAItem& item, Mode mode, const StageBudgets& budgets = {},
                           Variant variant = Variant::Full);

/// Records the response for the current stage, extracts its answer or
/// verdict, and applies the transition table:
///
///   FastThinking  -> Verification
///   Verification  Inference: Yes -> end (fast); No/Malformed -> SlowThinking
///                 Training:  fast correct -> end (fast); else SlowThinking
///   SlowThinking  Inference: end (slow)
///                 Training:  slow correct -> Summarization; else end (slow)
///   Summarization -> end (slow answer stays final)
///
/// FastOnly and SingleTurn episodes end after their first turn.
/// Inference transitions never read the item's ground truth.
EpisodeState advance(EpisodeState state, const StageResponse& response);

/// Final answer of a terminal episode; nullopt when the deciding stage
/// produced no box. Throws TaskError on a non-terminal state.
std::optional<grading::ExtractedAnswer> final_answer(const EpisodeState& state);

}  // namespace thinker::task
