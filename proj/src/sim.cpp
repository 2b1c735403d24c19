#include "thinker/sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "thinker/rollout.hpp"

namespace thinker::sim {
namespace {

using backend::PolicyParams;

SimEstimate estimate(double sum, double sum_sq, std::size_t n) {
  SimEstimate e;
  e.n = n;
  if (n == 0) return e;
  const double dn = static_cast<double>(n);
  e.value = sum / dn;
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - dn * e.value * e.value) / (dn - 1.0));
    e.std_error = std::sqrt(var / dn);
  }
  return e;
}

double parse_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw std::invalid_argument("bad number for " + what + ": \"" + text + "\"");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void SyntheticTaskConfig::validate() const {
  if (n_items == 0) throw std::invalid_argument("n_items must be positive");
  if (min_operands < 2 || max_operands < min_operands) {
    throw std::invalid_argument("operand count range must satisfy 2 <= min <= max");
  }
  if (operand_bound < 1) throw std::invalid_argument("operand_bound must be >= 1");
  const long double worst = static_cast<long double>(max_operands) *
                            std::pow(static_cast<long double>(operand_bound), static_cast<long double>(max_operands));
  if (worst >= static_cast<long double>(std::numeric_limits<std::int64_t>::max())) {
    throw std::invalid_argument("operand_bound too large for exact int64 answers");
  }
}

dataset::Dataset gen_synthetic(const SyntheticTaskConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> count(cfg.min_operands, cfg.max_operands);
  std::uniform_int_distribution<std::int64_t> operand(1, cfg.operand_bound);
  std::uniform_int_distribution<int> op(0, 2);
  constexpr char k_ops[] = {'+', '-', '*'};

  dataset::Dataset ds;
  ds.source_path = "<synthetic>";
  ds.items.reserve(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    const int n = count(rng);
    std::string expr = std::to_string(operand(rng));
    for (int j = 1; j < n; ++j) {
      expr += ' ';
      expr += k_ops[op(rng)];
      expr += ' ';
      expr += std::to_string(operand(rng));
    }
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", i);
    ds.items.push_back({id, "Compute " + expr + ".", std::to_string(evaluate_chain(expr))});
  }
  return ds;
}

std::int64_t evaluate_chain(const std::string& expression) {
  std::istringstream in(expression);
  std::string tok;
  std::vector<std::string> tokens;
  while (in >> tok) tokens.push_back(tok);
  if (tokens.empty() || tokens.size() % 2 == 0) throw std::invalid_argument("malformed chain: \"" + expression + "\"");

  auto number = [&](const std::string& t) {
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw std::invalid_argument("malformed operand \"" + t + "\"");
    }
    return std::stoll(t);
  };

  auto checked = [](bool overflow) {
    if (overflow) throw std::invalid_argument("chain overflows int64");
  };

  std::int64_t total = 0;
  std::int64_t term = number(tokens[0]);
  int sign = 1;
  for (std::size_t i = 1; i < tokens.size(); i += 2) {
    const std::string& op = tokens[i];
    const std::int64_t v = number(tokens[i + 1]);
    if (op == "*") {
      checked(__builtin_mul_overflow(term, v, &term));
    } else if (op == "+" || op == "-") {
      checked(__builtin_add_overflow(total, sign * term, &total));
      sign = op == "+" ? 1 : -1;
      term = v;
    } else {
      throw std::invalid_argument("unknown operator \"" + op + "\"");
    }
  }
  checked(__builtin_add_overflow(total, sign * term, &total));
  return total;
}

double analytic_accuracy(const PolicyParams& p) {
  const double p_s_reject = p.p_slow_after_false_reject.value_or(p.p_slow);
  return p.p_fast * p.t_p + p.p_fast * (1.0 - p.t_p) * p_s_reject + (1.0 - p.p_fast) * p.t_n * p.p_slow;
}

double prob_reject(const PolicyParams& p) { return p.p_fast * (1.0 - p.t_p) + (1.0 - p.p_fast) * p.t_n; }

StageLengths scripted_lengths(const PolicyParams& p, const task::StageBudgets& b) {
  using task::Stage;
  return {static_cast<double>(std::min(p.fast_tokens, b.budget(Stage::FastThinking))),
          static_cast<double>(std::min(p.verify_tokens, b.budget(Stage::Verification))),
          static_cast<double>(std::min(p.slow_tokens, b.budget(Stage::SlowThinking)))};
}

double analytic_expected_tokens(const PolicyParams& p, const StageLengths& l) {
  return l.fast + l.verify + prob_reject(p) * l.slow;
}

MonteCarloResult monte_carlo(const PolicyParams& params, std::size_t n_episodes, std::uint64_t seed,
                             const task::StageBudgets& budgets, std::size_t parallelism) {
  if (n_episodes == 0) throw std::invalid_argument("monte_carlo needs at least one episode");
  backend::ScriptedPolicy policy(params);

  SyntheticTaskConfig data_cfg;
  data_cfg.seed = seed;
  const auto items = gen_synthetic(data_cfg).items;

  std::vector<rollout::Transcript> runs(n_episodes);
  rollout::parallel_for(n_episodes, parallelism, [&](std::size_t i) {
    runs[i] = rollout::run_episode(policy, items[i % items.size()], task::Mode::Inference, budgets,
                                   rollout::episode_seed(seed, i));
    rollout::score_transcript(runs[i], {}, {});
  });

  double acc = 0.0, acc_sq = 0.0, tok = 0.0, tok_sq = 0.0, fast = 0.0, fast_sq = 0.0;
  std::size_t n = 0;
  for (const auto& t : runs) {
    if (t.failed) continue;
    ++n;
    const double c = t.correct.value_or(false) ? 1.0 : 0.0;
    const double f = t.fast_correct.value_or(false) ? 1.0 : 0.0;
    const double l = t.total_tokens();
    acc += c;
    acc_sq += c * c;
    fast += f;
    fast_sq += f * f;
    tok += l;
    tok_sq += l * l;
  }
  return {estimate(acc, acc_sq, n), estimate(tok, tok_sq, n), estimate(fast, fast_sq, n)};
}

SweepSpec SweepSpec::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("sweep must look like name=start:stop:step");
  SweepSpec s;
  s.parameter = text.substr(0, eq);
  const std::string range = text.substr(eq + 1);
  const auto c1 = range.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : range.find(':', c1 + 1);
  if (c2 == std::string::npos) throw std::invalid_argument("sweep must look like name=start:stop:step");
  s.start = parse_double(range.substr(0, c1), "sweep start");
  s.stop = parse_double(range.substr(c1 + 1, c2 - c1 - 1), "sweep stop");
  s.step = parse_double(range.substr(c2 + 1), "sweep step");
  if (!(s.step > 0.0)) throw std::invalid_argument("sweep step must be positive");
  if (s.stop < s.start) throw std::invalid_argument("sweep stop must be >= start");
  return s;
}

std::vector<double> SweepSpec::values() const {
  // Tolerate binary rounding of the step so 0:1:0.1 yields 11 points.
  const auto steps = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  std::vector<double> out;
  out.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) out.push_back(std::min(start + static_cast<double>(i) * step, stop));
  return out;
}

void set_param(PolicyParams& p, const std::string& name, double v) {
  auto as_int = [&](int& field) {
    if (v != std::floor(v)) throw std::invalid_argument(name + " must be an integer");
    field = static_cast<int>(v);
  };
  if (name == "p_fast") p.p_fast = v;
  else if (name == "t_p") p.t_p = v;
  else if (name == "t_n") p.t_n = v;
  else if (name == "p_slow") p.p_slow = v;
  else if (name == "p_slow_after_false_reject") p.p_slow_after_false_reject = v;
  else if (name == "p_single") p.p_single = v;
  else if (name == "fast_tokens") as_int(p.fast_tokens);
  else if (name == "verify_tokens") as_int(p.verify_tokens);
  else if (name == "slow_tokens") as_int(p.slow_tokens);
  else if (name == "summary_tokens") as_int(p.summary_tokens);
  else if (name == "logprob_per_token") p.logprob_per_token = v;
  else throw std::invalid_argument("unknown policy parameter \"" + name + "\"");
}

std::vector<SweepRow> sweep(const PolicyParams& base, const SweepSpec& spec, std::size_t n_episodes,
                            std::uint64_t seed, const task::StageBudgets& budgets, std::size_t parallelism) {
  std::vector<SweepRow> rows;
  for (double v : spec.values()) {
    PolicyParams p = base;
    set_param(p, spec.parameter, v);
    p.validate();
    SweepRow row;
    row.value = v;
    row.analytic_accuracy = analytic_accuracy(p);
    row.analytic_tokens = analytic_expected_tokens(p, scripted_lengths(p, budgets));
    // Same seed at every grid point: common random numbers across the sweep.
    row.mc = monte_carlo(p, n_episodes, seed, budgets, parallelism);
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << spec.parameter
     << "\tanalytic_accuracy\tmc_accuracy\tmc_accuracy_se\tmc_fast_accuracy\tanalytic_tokens\tmc_tokens\tmc_tokens_se"
        "\tepisodes\n";
  for (const auto& r : rows) {
    os << fmt(r.value) << '\t' << fmt(r.analytic_accuracy) << '\t' << fmt(r.mc.accuracy.value) << '\t'
       << fmt(r.mc.accuracy.std_error) << '\t' << fmt(r.mc.fast_accuracy.value) << '\t' << fmt(r.analytic_tokens)
       << '\t' << fmt(r.mc.tokens.value) << '\t' << fmt(r.mc.tokens.std_error) << '\t' << r.mc.accuracy.n << '\n';
  }
  return os.str();
}

}  // namespace thinker::sim
