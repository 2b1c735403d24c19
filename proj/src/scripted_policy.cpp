#include <array>
#include <stdexcept>

#include "thinker/backend.hpp"
#include "thinker/grading.hpp"
#include "thinker/seed.hpp"

namespace thinker::backend {
namespace {

constexpr std::array<std::string_view, 8> k_filler = {"Consider", "the", "expression", "carefully", "and",
                                                      "compute", "each", "term."};

// Stream ids for the per-stage uniform draws.
enum StreamId : std::uint64_t { kFast = 1, kVerify = 2, kSlow = 3, kSingle = 5 };

bool draw(std::uint64_t seed, StreamId stream, double probability) {
  return unit_interval(derive_seed(seed, {stream})) < probability;
}

// `tokens` whitespace tokens in total: filler words followed by `tail`.
std::string compose(int tokens, std::string_view tail) {
  const int tail_tokens = default_tokenizer().count(tail);
  const int filler = tokens > tail_tokens ? tokens - tail_tokens : 0;
  std::string out;
  for (int i = 0; i < filler; ++i) {
    out.append(k_filler[static_cast<std::size_t>(i) % k_filler.size()]);
    out.push_back(' ');
  }
  out.append(tail);
  return out;
}

std::string boxed(std::string_view content) { return "\\boxed{" + std::string(content) + "}"; }

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void PolicyParams::validate() const {
  check_probability(p_fast, "p_fast");
  check_probability(t_p, "t_p");
  check_probability(t_n, "t_n");
  check_probability(p_slow, "p_slow");
  if (p_slow_after_false_reject) check_probability(*p_slow_after_false_reject, "p_slow_after_false_reject");
  if (p_single) check_probability(*p_single, "p_single");
  if (fast_tokens <= 0 || verify_tokens <= 0 || slow_tokens <= 0 || summary_tokens <= 0) {
    throw std::invalid_argument("scripted stage lengths must be positive");
  }
  if (logprob_per_token > 0.0) throw std::invalid_argument("logprob_per_token must be <= 0");
}

std::string perturb_answer(std::string_view truth) {
  if (const auto r = grading::parse_rational(grading::normalize(truth))) {
    grading::Rational next = *r;
    if (!__builtin_add_overflow(next.num, next.den, &next.num)) return next.to_string();
  }
  return std::string(truth) + "_wrong";
}

std::string scripted_respond(std::string_view key, const dataset::QAItem& item, const PolicyParams& params,
                             std::uint64_t rng_seed, bool fast_was_correct, std::string_view slow_answer) {
  auto answer_for = [&](bool correct) { return correct ? item.answer : perturb_answer(item.answer); };

  if (key == task::stage_key(Stage::FastThinking)) {
    const bool correct = draw(rng_seed, kFast, params.p_fast);
    return compose(params.fast_tokens, boxed(answer_for(correct)));
  }
  if (key == task::stage_key(Stage::Verification)) {
    // No on a wrong answer iff u >= 1 - t_n, so the No region for a correct
    // answer (u >= t_p) nests inside it whenever t_p + t_n >= 1.
    const double u = unit_interval(derive_seed(rng_seed, {kVerify}));
    const bool yes = fast_was_correct ? u < params.t_p : u < 1.0 - params.t_n;
    return compose(params.verify_tokens, boxed(yes ? "Yes" : "No"));
  }
  if (key == task::stage_key(Stage::SlowThinking)) {
    const double p = fast_was_correct ? params.p_slow_after_false_reject.value_or(params.p_slow) : params.p_slow;
    const bool correct = draw(rng_seed, kSlow, p);
    return "\n" + compose(params.slow_tokens, boxed(answer_for(correct)) + "\n</think>");
  }
  if (key == task::stage_key(Stage::Summarization)) {
    return compose(params.summary_tokens, boxed(slow_answer));
  }
  if (key == k_single_turn_key) {
    const bool correct = draw(rng_seed, kSingle, params.p_single.value_or(params.p_slow));
    return compose(params.slow_tokens, boxed(answer_for(correct)));
  }
  throw std::invalid_argument("scripted policy: unknown request key \"" + std::string(key) + "\"");
}

ScriptedPolicy::ScriptedPolicy(PolicyParams params) : params_(params) { params_.validate(); }

GenerationResult ScriptedPolicy::generate(const GenerationRequest& request) {
  request.validate();
  if (!request.tag) throw BackendError("scripted policy needs a tagged request");
  const auto& tag = *request.tag;

  // Assistant turns sit at odd message indices: fast, verify, slow, summary.
  auto assistant_turn = [&](std::size_t n) -> std::string_view {
    const std::size_t idx = 2 * n + 1;
    return idx < request.messages.size() ? std::string_view(request.messages[idx].content) : std::string_view{};
  };

  bool fast_was_correct = false;
  std::string slow_answer;
  if (tag.key != task::stage_key(Stage::FastThinking) && tag.key != k_single_turn_key) {
    const auto fast = grading::extract_boxed(assistant_turn(0));
    fast_was_correct = fast && grading::answers_equal(*fast, tag.item.answer);
  }
  if (tag.key == task::stage_key(Stage::Summarization)) {
    if (const auto slow = grading::extract_boxed(assistant_turn(2))) slow_answer = slow->raw;
  }

  std::string text = scripted_respond(tag.key, tag.item, params_, tag.episode_seed, fast_was_correct, slow_answer);
  return enforce_budget(std::move(text), request.max_tokens, default_tokenizer());
}

double ScriptedPolicy::score_logprob(const std::vector<Message>&, std::string_view completion) {
  return params_.logprob_per_token * default_tokenizer().count(completion);
}

}  // namespace thinker::backend
