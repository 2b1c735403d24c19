#include "thinker/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "thinker/seed.hpp"

namespace thinker::eval {
namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool matches_at(std::string_view text, std::size_t at, std::string_view term) {
  if (at + term.size() > text.size()) return false;
  for (std::size_t i = 0; i < term.size(); ++i) {
    if (lower(text[at + i]) != lower(term[i])) return false;
  }
  return true;
}

task::Variant variant_for(EvalMode m) {
  switch (m) {
    case EvalMode::Thinker: return task::Variant::Full;
    case EvalMode::ThinkerFast: return task::Variant::FastOnly;
    case EvalMode::SingleTurn: return task::Variant::SingleTurn;
  }
  return task::Variant::Full;
}

// Sum in sorted order so the result does not depend on question order.
double order_free_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view eval_mode_key(EvalMode m) {
  switch (m) {
    case EvalMode::Thinker: return "thinker";
    case EvalMode::ThinkerFast: return "thinker-fast";
    case EvalMode::SingleTurn: return "single-turn";
  }
  return "thinker";
}

std::optional<EvalMode> eval_mode_from_key(std::string_view key) {
  for (EvalMode m : {EvalMode::Thinker, EvalMode::ThinkerFast, EvalMode::SingleTurn}) {
    if (eval_mode_key(m) == key) return m;
  }
  return std::nullopt;
}

void ReflectionVocab::validate() const {
  if (terms.empty()) throw std::invalid_argument("reflection vocabulary is empty");
  for (const auto& t : terms) {
    if (t.empty()) throw std::invalid_argument("reflection vocabulary has an empty term");
  }
}

std::size_t count_reflections(std::string_view text, const ReflectionVocab& vocab) {
  std::size_t n = 0;
  for (const auto& term : vocab.terms) {
    if (term.empty()) continue;
    for (std::size_t i = 0; i + term.size() <= text.size(); ++i) {
      if (i > 0 && is_word_char(text[i - 1])) continue;
      if (!matches_at(text, i, term)) continue;
      const std::size_t end = i + term.size();
      if (end < text.size() && is_word_char(text[end])) continue;
      ++n;
      i = end - 1;
    }
  }
  return n;
}

double standard_error(std::span<const double> per_question_means) {
  const std::size_t q = per_question_means.size();
  if (q < 2) throw std::invalid_argument("standard error needs at least two questions");
  const double mean = std::accumulate(per_question_means.begin(), per_question_means.end(), 0.0) / q;
  double ss = 0.0;
  for (double v : per_question_means) ss += (v - mean) * (v - mean);
  const double sample_var = ss / static_cast<double>(q - 1);
  return std::sqrt(sample_var / static_cast<double>(q));
}

std::vector<rollout::Transcript> run_samples(backend::Backend& backend, const dataset::Dataset& dataset,
                                             const EvalOptions& opts) {
  if (dataset.empty()) throw std::invalid_argument("evaluation dataset is empty");
  if (opts.k == 0) throw std::invalid_argument("k must be at least 1");
  opts.budgets.validate();

  const std::size_t n = dataset.size() * opts.k;
  const task::Variant variant = variant_for(opts.mode);
  std::vector<rollout::Transcript> out(n);
  rollout::parallel_for(n, opts.parallelism, [&](std::size_t i) {
    const std::size_t q = i / opts.k;
    const std::size_t j = i % opts.k;
    out[i] = rollout::run_episode(backend, dataset.items[q], task::Mode::Inference, opts.budgets,
                                  derive_seed(opts.seed, {q, j}), variant);
  });
  for (auto& t : out) rollout::score_transcript(t, {}, {});
  return out;
}

BenchmarkReport evaluate(backend::Backend& backend, const dataset::Dataset& dataset, const EvalOptions& opts) {
  opts.vocab.validate();
  return aggregate(run_samples(backend, dataset, opts), opts.mode, opts.k, opts.vocab);
}

BenchmarkReport aggregate(const std::vector<rollout::Transcript>& transcripts, EvalMode mode, std::size_t k,
                          const ReflectionVocab& vocab) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (transcripts.empty() || transcripts.size() % k != 0) {
    throw std::invalid_argument("transcript count must be a nonzero multiple of k");
  }

  BenchmarkReport r;
  r.mode = mode;
  r.k = k;

  std::vector<double> accuracies;
  std::vector<double> fast_accuracies;
  std::array<double, 4> stage_sum{};
  std::array<std::size_t, 4> stage_n{};
  double total_tokens = 0.0;
  double reflections = 0.0;
  std::size_t samples = 0;
  std::size_t slow_samples = 0;

  for (std::size_t begin = 0; begin < transcripts.size(); begin += k) {
    QuestionResult q;
    q.item_id = transcripts[begin].state.item().id;
    q.samples = k;
    for (std::size_t j = begin; j < begin + k; ++j) {
      const auto& t = transcripts[j];
      if (t.state.item().id != q.item_id) throw std::invalid_argument("transcripts are not grouped by question");
      if (t.failed) {
        ++q.failed;
        continue;
      }
      if (t.correct.value_or(false)) ++q.correct;
      if (t.fast_correct.value_or(false)) ++q.fast_correct;
    }
    r.failed_samples += q.failed;
    if (q.failed == k) {
      r.excluded.push_back(q.item_id);
      continue;
    }

    const double ok = static_cast<double>(k - q.failed);
    q.accuracy = static_cast<double>(q.correct) / ok;
    accuracies.push_back(q.accuracy);
    fast_accuracies.push_back(static_cast<double>(q.fast_correct) / ok);

    for (std::size_t j = begin; j < begin + k; ++j) {
      const auto& t = transcripts[j];
      if (t.failed) continue;
      ++samples;
      total_tokens += t.total_tokens();
      bool reached_slow = false;
      for (const auto& turn : t.state.turns()) {
        stage_sum[task::index_of(turn.stage)] += turn.token_count;
        ++stage_n[task::index_of(turn.stage)];
        reflections += static_cast<double>(count_reflections(turn.response, vocab));
        reached_slow = reached_slow || turn.stage == task::Stage::SlowThinking;
      }
      if (reached_slow) ++slow_samples;
    }
    r.questions.push_back(std::move(q));
  }

  r.accuracy = order_free_mean(accuracies);
  r.fast_accuracy = mode == EvalMode::SingleTurn ? 0.0 : order_free_mean(fast_accuracies);
  if (accuracies.size() >= 2) r.standard_error = standard_error(accuracies);
  for (std::size_t i = 0; i < 4; ++i) {
    r.mean_stage_tokens[i] = stage_n[i] == 0 ? 0.0 : stage_sum[i] / static_cast<double>(stage_n[i]);
  }
  if (samples > 0) {
    r.mean_total_tokens = total_tokens / static_cast<double>(samples);
    r.mean_reflections = reflections / static_cast<double>(samples);
    r.slow_rate = static_cast<double>(slow_samples) / static_cast<double>(samples);
  }
  if (total_tokens > 0.0) r.reflections_per_1k_tokens = 1000.0 * reflections / total_tokens;
  return r;
}

std::string format_report(const BenchmarkReport& r) {
  std::ostringstream os;
  auto row = [&os](std::string_view name, const std::string& value) {
    os << name;
    for (std::size_t i = name.size(); i < 26; ++i) os << ' ';
    os << value << '\n';
  };
  row("mode", std::string(eval_mode_key(r.mode)));
  row("k", std::to_string(r.k));
  row("questions", std::to_string(r.questions.size()));
  row("excluded questions", std::to_string(r.excluded.size()));
  row("failed samples", std::to_string(r.failed_samples));
  row("pass@1", fixed(100.0 * r.accuracy, 2) + "%");
  row("standard error", r.standard_error ? fixed(100.0 * *r.standard_error, 2) + "%" : std::string("n/a"));
  if (r.mode != EvalMode::SingleTurn) row("fast accuracy", fixed(100.0 * r.fast_accuracy, 2) + "%");
  if (r.mode == EvalMode::Thinker) row("slow rate", fixed(100.0 * r.slow_rate, 2) + "%");
  // The single-turn response is one stage; only the total is meaningful.
  for (task::Stage s : task::k_all_stages) {
    if (r.mode == EvalMode::SingleTurn) break;
    const double v = r.mean_stage_tokens[task::index_of(s)];
    if (v > 0.0) row("mean tokens " + std::string(task::stage_key(s)), fixed(v, 1));
  }
  row("mean tokens total", fixed(r.mean_total_tokens, 1));
  row("reflections / sample", fixed(r.mean_reflections, 3));
  row("reflections / 1k tokens", fixed(r.reflections_per_1k_tokens, 3));
  return os.str();
}

}  // namespace thinker::eval
