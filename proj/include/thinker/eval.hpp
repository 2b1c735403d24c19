#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thinker/backend.hpp"
#include "thinker/dataset.hpp"
#include "thinker/rollout.hpp"
#include "thinker/task.hpp"

namespace thinker::eval {

enum class EvalMode { Thinker, ThinkerFast, SingleTurn };

std::string_view eval_mode_key(EvalMode m);
std::optional<EvalMode> eval_mode_from_key(std::string_view key);

/// Terms whose whole-word, case-insensitive occurrences count as
/// reflection patterns.
struct ReflectionVocab {
  std::vector<std::string> terms = {"wait", "however", "alternatively"};

  void validate() const;
};

std::size_t count_reflections(std::string_view text, const ReflectionVocab& vocab);

/// sqrt(sample variance of per-question accuracies / Q): the clustered
/// standard error with questions as clusters of equal size k. Throws
/// std::invalid_argument with fewer than two questions.
double standard_error(std::span<const double> per_question_means);

struct QuestionResult {
  std::string item_id;
  std::size_t samples = 0;
  std::size_t failed = 0;
  std::size_t correct = 0;
  std::size_t fast_correct = 0;
  /// Mean correctness over the non-failed samples.
  double accuracy = 0.0;
};

struct BenchmarkReport {
  EvalMode mode = EvalMode::Thinker;
  std::size_t k = 0;
  std::vector<QuestionResult> questions;
  /// Questions whose samples all failed; excluded from every statistic.
  std::vector<std::string> excluded;
  std::size_t failed_samples = 0;

  double accuracy = 0.0;
  /// Fast Thinking accuracy (equals accuracy for ThinkerFast; 0 for SingleTurn).
  double fast_accuracy = 0.0;
  /// Absent with fewer than two included questions.
  std::optional<double> standard_error;

  /// Mean tokens per stage over samples that executed it.
  std::array<double, 4> mean_stage_tokens{};
  double mean_total_tokens = 0.0;
  /// Mean reflection count per sample (summed over its responses) and the
  /// same normalized per 1000 generated tokens.
  double mean_reflections = 0.0;
  double reflections_per_1k_tokens = 0.0;
  /// Fraction of Thinker samples that reached Slow Thinking.
  double slow_rate = 0.0;
};

struct EvalOptions {
  EvalMode mode = EvalMode::Thinker;
  std::size_t k = 16;
  task::StageBudgets budgets;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  ReflectionVocab vocab;
};

/// Transcripts in question-major order (k per question).
std::vector<rollout::Transcript> run_samples(backend::Backend& backend, const dataset::Dataset& dataset,
                                             const EvalOptions& opts);

/// Runs k samples per question in the requested mode (Inference routing
/// for Thinker) and aggregates Pass@1. Sample seeds depend only on
/// (seed, question index, sample index), so the Fast Thinking turn of a
/// Thinker run and a ThinkerFast run with the same seed see the same seed.
BenchmarkReport evaluate(backend::Backend& backend, const dataset::Dataset& dataset, const EvalOptions& opts);

/// Aggregates already-run, scored transcripts (question-major, k each).
BenchmarkReport aggregate(const std::vector<rollout::Transcript>& transcripts, EvalMode mode, std::size_t k,
                          const ReflectionVocab& vocab);

/// Fixed-width text table of a report.
std::string format_report(const BenchmarkReport& report);

}  // namespace thinker::eval
