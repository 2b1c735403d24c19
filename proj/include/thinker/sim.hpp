#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "thinker/backend.hpp"
#include "thinker/dataset.hpp"
#include "thinker/task.hpp"

namespace thinker::sim {

/// Integer arithmetic chains over +, - and * with standard precedence.
struct SyntheticTaskConfig {
  std::size_t n_items = 100;
  int min_operands = 3;
  int max_operands = 6;
  /// Operands are drawn from [1, operand_bound].
  std::int64_t operand_bound = 99;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an empty operand range or a bound
  /// whose worst-case product could overflow int64.
  void validate() const;
};

dataset::Dataset gen_synthetic(const SyntheticTaskConfig& cfg);

/// Evaluates "a op b op c ..." with * binding tighter than + and -.
/// Throws std::invalid_argument on malformed input.
std::int64_t evaluate_chain(const std::string& expression);

struct SimEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// P(final answer correct) of an inference-mode episode under the
/// scripted policy:
///   p_f * t_p + p_f * (1 - t_p) * p_s' + (1 - p_f) * t_n * p_s
/// where p_s' is the false-reject override (defaults to p_s).
double analytic_accuracy(const backend::PolicyParams& params);

/// P(verdict No) = p_f * (1 - t_p) + (1 - p_f) * t_n.
double prob_reject(const backend::PolicyParams& params);

struct StageLengths {
  double fast = 0.0;
  double verify = 0.0;
  double slow = 0.0;
};

/// Scripted stage lengths clipped to the budgets.
StageLengths scripted_lengths(const backend::PolicyParams& params, const task::StageBudgets& budgets);

/// Expected inference-mode tokens: L_fast + L_verify + P(No) * L_slow.
double analytic_expected_tokens(const backend::PolicyParams& params, const StageLengths& lengths);

struct MonteCarloResult {
  SimEstimate accuracy;
  SimEstimate tokens;
  /// Fast Thinking accuracy over the same episodes.
  SimEstimate fast_accuracy;
};

/// Runs n inference-mode episodes through the full engine (scripted
/// policy, state machine, scoring) over a synthetic dataset and reports
/// mean +/- standard error.
MonteCarloResult monte_carlo(const backend::PolicyParams& params, std::size_t n_episodes, std::uint64_t seed,
                             const task::StageBudgets& budgets = {}, std::size_t parallelism = 1);

struct SweepSpec {
  std::string parameter;
  double start = 0.0;
  double stop = 1.0;
  double step = 0.1;

  /// Parses "name=start:stop:step".
  static SweepSpec parse(const std::string& text);
  std::vector<double> values() const;
};

struct SweepRow {
  double value = 0.0;
  double analytic_accuracy = 0.0;
  double analytic_tokens = 0.0;
  MonteCarloResult mc;
};

/// Sets one named PolicyParams field ("p_fast", "t_p", "t_n", "p_slow", ...).
void set_param(backend::PolicyParams& params, const std::string& name, double value);

std::vector<SweepRow> sweep(const backend::PolicyParams& base, const SweepSpec& spec, std::size_t n_episodes,
                            std::uint64_t seed, const task::StageBudgets& budgets = {}, std::size_t parallelism = 1);

/// Tab-separated columns with a header row.
std::string format_sweep(const SweepSpec& spec, const std::vector<SweepRow>& rows);

}  // namespace thinker::sim
