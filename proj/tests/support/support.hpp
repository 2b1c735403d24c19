// Shared test helpers: a small generator, independent oracles, and the
// case tables used by both the unit tests and the acceptance binary.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "thinker/backend.hpp"
#include "thinker/dataset.hpp"
#include "thinker/grading.hpp"
#include "thinker/rewards.hpp"

namespace support {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::int64_t integer(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_); }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  // k / 256 for k in [lo, hi]; exact in binary.
  double dyadic(int lo, int hi) { return static_cast<double>(integer(lo, hi)) / 256.0; }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(v.size()) - 1))];
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Generalized advantage estimation by direct summation:
///   A_t = sum_{l=0}^{e-1-t} (gamma*lambda)^l * delta_{t+l}
/// where e is the exclusive end of t's stage and V past a stage end is 0.
inline std::vector<double> brute_force_gae(const std::vector<double>& r, const std::vector<double>& v,
                                           const std::vector<std::size_t>& ends, double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<std::size_t> stage_end(n);
  std::size_t s = 0;
  for (std::size_t t = 0; t < n; ++t) {
    while (t >= ends[s]) ++s;
    stage_end[t] = ends[s];
  }
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < stage_end[t] ? v[t + 1] : 0.0;
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    double sum = 0.0;
    for (std::size_t u = t; u < stage_end[t]; ++u) {
      sum += weight * delta[u];
      weight *= gamma * lambda;
    }
    adv[t] = sum;
  }
  return adv;
}

/// Inference-mode accuracy by enumerating the outcome tree of one episode.
inline double enumerate_accuracy(const thinker::backend::PolicyParams& p) {
  double acc = 0.0;
  for (int fast_ok = 0; fast_ok < 2; ++fast_ok) {
    const double pf = fast_ok ? p.p_fast : 1.0 - p.p_fast;
    for (int says_yes = 0; says_yes < 2; ++says_yes) {
      const double yes_prob = fast_ok ? p.t_p : 1.0 - p.t_n;
      const double pv = says_yes ? yes_prob : 1.0 - yes_prob;
      if (says_yes) {
        acc += pf * pv * (fast_ok ? 1.0 : 0.0);
        continue;
      }
      const double ps = fast_ok ? p.p_slow_after_false_reject.value_or(p.p_slow) : p.p_slow;
      acc += pf * pv * ps;
    }
  }
  return acc;
}

/// Expected inference-mode tokens by enumerating the same tree.
inline double enumerate_tokens(const thinker::backend::PolicyParams& p, double lf, double lv, double ls) {
  double e = 0.0;
  for (int fast_ok = 0; fast_ok < 2; ++fast_ok) {
    const double pf = fast_ok ? p.p_fast : 1.0 - p.p_fast;
    const double no_prob = fast_ok ? 1.0 - p.t_p : p.t_n;
    e += pf * ((1.0 - no_prob) * (lf + lv) + no_prob * (lf + lv + ls));
  }
  return e;
}

// ---- grading corpus --------------------------------------------------------

enum class GradeKind { Extract, Normalize, Equal, Verdict };

struct GradingCase {
  GradeKind kind;
  std::string input;
  /// Extract: expected raw (nullopt = absent). Normalize: expected output.
  /// Equal: the other side. Verdict: "yes", "no" or "malformed".
  std::optional<std::string> expected;
  bool equal = false;
};

inline const std::vector<GradingCase>& grading_cases() {
  using K = GradeKind;
  static const std::vector<GradingCase> cases = {
      {K::Extract, "The perimeter of the pool is \\boxed{18 - 4\\sqrt{3}} meters.", "18 - 4\\sqrt{3}"},
      {K::Extract, "$\\boxed{No}$", "No"},
      {K::Extract, "\\boxed{\\frac{1}{2}}", "\\frac{1}{2}"},
      {K::Extract, "no box here", std::nullopt},
      {K::Extract, "first \\boxed{1} then \\boxed{2}", "2"},
      {K::Extract, "\\boxed{a} and \\boxed{b", "a"},
      {K::Extract, "\\boxed{unbalanced", std::nullopt},
      {K::Extract, "\\boxed {5}", "5"},
      {K::Extract, "\\boxed{\\{x\\}}", "\\{x\\}"},
      {K::Extract, "\\boxed{}", ""},
      {K::Extract, "\\boxedfoo{3}", std::nullopt},
      {K::Extract, "\\boxed{a{b}c} tail }", "a{b}c"},
      {K::Normalize, " $18-4\\sqrt{3}$ ", "18-4\\sqrt{3}"},
      {K::Normalize, "\\left(3, 4\\right)", "(3, 4)"},
      {K::Normalize, "0.50.", "0.50"},
      {K::Normalize, "a \t\n  b", "a b"},
      {K::Normalize, "3\\,000", "3000"},
      {K::Normalize, "\\leftarrow", "\\leftarrow"},
      {K::Normalize, "$$x$$", "x"},
      {K::Equal, "1/2", "0.5", true},
      {K::Equal, "6\\sqrt{3}-12", "18 - 4\\sqrt{3}", false},
      {K::Equal, "x", "x", true},
      {K::Equal, "X", "x", false},
      {K::Equal, "-3", "-3.0", true},
      {K::Equal, "2/4", "1/2", true},
      {K::Equal, "$7$", "7", true},
      {K::Equal, "7.", "7", true},
      {K::Equal, "0.1", "1/10", true},
      {K::Equal, "10", "1", false},
      {K::Verdict, "... Thus our initial approach is wrong. $\\boxed{No}$", "no"},
      {K::Verdict, "\\boxed{YES}", "yes"},
      {K::Verdict, "I think yes.", "malformed"},
      {K::Verdict, "\\boxed{ no. }", "no"},
      {K::Verdict, "\\boxed{maybe}", "malformed"},
      {K::Verdict, "\\boxed{Yes} on reflection \\boxed{No}", "no"},
  };
  return cases;
}

/// Runs one grading case; returns an empty string on success, otherwise
/// a description of the mismatch.
inline std::string check_grading_case(const GradingCase& c) {
  using namespace thinker::grading;
  switch (c.kind) {
    case GradeKind::Extract: {
      const auto got = extract_boxed(c.input);
      const std::optional<std::string> raw = got ? std::optional<std::string>(got->raw) : std::nullopt;
      if (raw == c.expected) return {};
      return "extract(" + c.input + ") = " + (raw ? "\"" + *raw + "\"" : "absent");
    }
    case GradeKind::Normalize: {
      const auto got = normalize(c.input);
      if (got == *c.expected) return {};
      return "normalize(" + c.input + ") = \"" + got + "\"";
    }
    case GradeKind::Equal: {
      const bool got = answers_equal(make_answer(c.input), make_answer(*c.expected));
      if (got == c.equal) return {};
      return "answers_equal(" + c.input + ", " + *c.expected + ") = " + (got ? "true" : "false");
    }
    case GradeKind::Verdict: {
      const auto got = std::string(to_string(extract_verdict(c.input)));
      if (got == *c.expected) return {};
      return "verdict(" + c.input + ") = " + got;
    }
  }
  return "unknown case kind";
}

// ---- reward substitution table ---------------------------------------------

struct RewardCase {
  std::string name;
  std::function<double()> actual;
  /// The defining formula evaluated in IEEE doubles.
  double formula;
  /// The decimal value a person would write down.
  double decimal;
};

inline std::optional<thinker::grading::ExtractedAnswer> ans(const char* s) { return thinker::grading::make_answer(s); }

inline std::vector<RewardCase> reward_cases() {
  using thinker::grading::Verdict;
  using namespace thinker::rewards;
  const RewardConfig base;
  auto with_c = [](double c) {
    RewardConfig cfg;
    cfg.c = c;
    return cfg;
  };
  RewardConfig per_token;
  per_token.per_token_mean_logprob = true;
  RewardConfig small_batch;
  small_batch.min_batch_for_mean = 4;
  RewardConfig ema;
  ema.estimator = TrailingEstimator::Ema;

  const std::optional<thinker::grading::ExtractedAnswer> none;
  auto tp = [](double p) { return TrailingAccuracy{p, 0}; };

  return {
      {"verify correct Yes p=0.7", [=] { return reward_verify(true, Verdict::Yes, tp(0.7)); }, 1.0 - 0.7, 0.3},
      {"verify incorrect No p=0.7", [=] { return reward_verify(false, Verdict::No, tp(0.7)); }, 0.7, 0.7},
      {"verify correct No p=0.7", [=] { return reward_verify(true, Verdict::No, tp(0.7)); }, 0.0, 0.0},
      {"verify incorrect Yes p=0.7", [=] { return reward_verify(false, Verdict::Yes, tp(0.7)); }, 0.0, 0.0},
      {"verify correct Malformed", [=] { return reward_verify(true, Verdict::Malformed, tp(0.7)); }, 0.0, 0.0},
      {"verify incorrect Malformed", [=] { return reward_verify(false, Verdict::Malformed, tp(0.7)); }, 0.0, 0.0},
      {"verify correct Yes p=0.5", [=] { return reward_verify(true, Verdict::Yes, tp(0.5)); }, 0.5, 0.5},
      {"verify incorrect No p=0.5", [=] { return reward_verify(false, Verdict::No, tp(0.5)); }, 0.5, 0.5},
      {"verify correct Yes p=0", [=] { return reward_verify(true, Verdict::Yes, tp(0.0)); }, 1.0, 1.0},
      {"verify incorrect No p=1", [=] { return reward_verify(false, Verdict::No, tp(1.0)); }, 1.0, 1.0},
      {"verify incorrect No p=0", [=] { return reward_verify(false, Verdict::No, tp(0.0)); }, 0.0, 0.0},
      {"summary match -200 350 tokens", [=] { return reward_summary(ans("5"), ans("5"), -200.0, 350, base); },
       1.0 + 1e-3 * -200.0, 0.8},
      {"summary gate at 299 tokens", [=] { return reward_summary(ans("5"), ans("5"), -200.0, 299, base); }, 0.0, 0.0},
      {"summary at exactly 300 tokens", [=] { return reward_summary(ans("5"), ans("5"), -200.0, 300, base); },
       1.0 + 1e-3 * -200.0, 0.8},
      {"summary gate at 120 tokens", [=] { return reward_summary(ans("5"), ans("5"), -200.0, 120, base); }, 0.0, 0.0},
      {"summary mismatch -100 400 tokens", [=] { return reward_summary(ans("4"), ans("5"), -100.0, 400, base); },
       1e-3 * -100.0, -0.1},
      {"summary match zero logprob", [=] { return reward_summary(ans("5"), ans("5"), 0.0, 300, base); }, 1.0, 1.0},
      {"summary mismatch zero logprob", [=] { return reward_summary(ans("4"), ans("5"), 0.0, 1000, base); }, 0.0, 0.0},
      {"summary c=0", [=] { return reward_summary(ans("5"), ans("5"), -200.0, 350, with_c(0.0)); }, 1.0, 1.0},
      {"summary without box", [=] { return reward_summary(none, ans("5"), -50.0, 500, base); }, 1e-3 * -50.0, -0.05},
      {"summary numeric match 1/2 vs 0.5", [=] { return reward_summary(ans("1/2"), ans("0.5"), -10.0, 300, base); },
       1.0 + 1e-3 * -10.0, 0.99},
      {"summary per-token mean", [=] { return reward_summary(ans("5"), ans("5"), -200.0, 400, per_token); },
       1.0 + 1e-3 * (-200.0 / 400.0), 0.9995},
      {"fast correct", [=] { return reward_fast(ans("42"), "42"); }, 1.0, 1.0},
      {"fast wrong", [=] { return reward_fast(ans("41"), "42"); }, 0.0, 0.0},
      {"fast absent", [=] { return reward_fast(none, "42"); }, 0.0, 0.0},
      {"slow correct", [=] { return reward_slow(ans("\\frac{1}{2}"), "\\frac{1}{2}"); }, 1.0, 1.0},
      {"slow absent", [=] { return reward_slow(none, "7"); }, 0.0, 0.0},
      {"trailing EMA p=0.5 mean=1",
       [=] {
         const std::vector<double> batch = {1.0, 1.0};
         return update_trailing({}, batch, base).p;
       },
       0.9 * 0.5 + (1.0 - 0.9) * 1.0, 0.55},
      {"trailing batch mean [1,0,1,1]",
       [=] {
         const std::vector<double> batch = {1.0, 0.0, 1.0, 1.0};
         return update_trailing({}, batch, small_batch).p;
       },
       3.0 / 4.0, 0.75},
      {"trailing EMA estimator on a large batch",
       [=] {
         const std::vector<double> batch(10, 0.0);
         return update_trailing({}, batch, ema).p;
       },
       0.9 * 0.5, 0.45},
  };
}

/// True when a and b are equal or adjacent doubles.
inline bool within_one_ulp(double a, double b) {
  return a == b || std::nextafter(a, b) == b;
}

}  // namespace support
