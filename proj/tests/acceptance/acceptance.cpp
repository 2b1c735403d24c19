// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "../support/http_stub.hpp"
#include "../support/support.hpp"
#include "../support/truth_table.hpp"
#include "thinker/eval.hpp"
#include "thinker/grading.hpp"
#include "thinker/http_backend.hpp"
#include "thinker/rollout.hpp"
#include "thinker/sim.hpp"
#include "thinker/transcript_io.hpp"

using namespace thinker;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail = why;
  o.pass = false;
}

backend::PolicyParams params(double pf, double tp, double tn, double ps) {
  backend::PolicyParams p;
  p.p_fast = pf;
  p.t_p = tp;
  p.t_n = tn;
  p.p_slow = ps;
  return p;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome truth_table() {
  Outcome o;
  const auto failures = support::check_route_table();
  if (!failures.empty()) fail(o, failures.front());
  else o.detail = std::to_string(support::route_table().size()) + " rows match";
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome class_balance() {
  Outcome o;
  sim::SyntheticTaskConfig syn;
  syn.seed = 2;
  const auto items = sim::gen_synthetic(syn).items;  // 100 items
  struct Policy { const char* name; double tp, tn; };
  for (const Policy& pol : {Policy{"always-Yes", 1.0, 0.0}, Policy{"always-No", 0.0, 1.0}}) {
    backend::ScriptedPolicy policy(params(0.6, pol.tp, pol.tn, 0.5));
    rollout::BatchConfig cfg;
    cfg.samples_per_prompt = 100;  // 10,000 episodes
    const auto batch = rollout::run_batch(policy, items, task::Mode::Training, cfg, 20261019);
    double sum = 0, sum_sq = 0;
    for (const auto& t : batch.transcripts) {
      const double r = t.rewards.verify.value_or(0.0);
      sum += r;
      sum_sq += r * r;
    }
    const double n = static_cast<double>(batch.transcripts.size());
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
    const bool ok = std::abs(mean - 0.24) <= 3 * se;
    const std::string line = std::string(pol.name) + fmt(" mean %.5f se %.5f", mean, se);
    if (!ok) fail(o, line);
    else o.detail += (o.detail.empty() ? "" : "; ") + line;
  }
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome analytic_agreement() {
  Outcome o;
  support::Gen g(20261019);
  std::string summary;
  for (int draw = 0; draw < 5; ++draw) {
    auto p = params(g.unit(), g.unit(), g.unit(), g.unit());
    p.fast_tokens = static_cast<int>(g.integer(10, 900));
    p.verify_tokens = static_cast<int>(g.integer(10, 1500));
    p.slow_tokens = static_cast<int>(g.integer(100, 5000));
    const auto mc = sim::monte_carlo(p, 10000, 1000 + static_cast<std::uint64_t>(draw));
    const double acc = sim::analytic_accuracy(p);
    const double tok = sim::analytic_expected_tokens(p, sim::scripted_lengths(p, {}));
    const double za = mc.accuracy.std_error > 0 ? (mc.accuracy.value - acc) / mc.accuracy.std_error : 0;
    const double zt = mc.tokens.std_error > 0 ? (mc.tokens.value - tok) / mc.tokens.std_error : 0;
    const bool ok_a = mc.accuracy.std_error > 0 ? std::abs(za) <= 3 : mc.accuracy.value == acc;
    const bool ok_t = mc.tokens.std_error > 0 ? std::abs(zt) <= 3 : mc.tokens.value == tok;
    const std::string line = "draw " + std::to_string(draw) + fmt(" z_acc %+.2f z_tok %+.2f", za, zt);
    if (!ok_a || !ok_t) fail(o, line);
    summary += (summary.empty() ? "" : ", ") + fmt("%+.2f/%+.2f", za, zt);
  }
  if (o.pass) o.detail = "z(acc)/z(tokens): " + summary;
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome credit_assignment() {
  using rollout::Trajectory;
  Outcome o;
  support::Gen g(4);
  const std::pair<double, double> gl[] = {{1.0, 1.0}, {0.5, 1.0}, {1.0, 0.5}, {0.5, 0.5}};
  for (int i = 0; i < 1000 && o.pass; ++i) {
    Trajectory t;
    const int n_stages = static_cast<int>(g.integer(1, 4));
    for (int s = 0; s < n_stages; ++s) {
      t.stages.push_back(task::k_all_stages[static_cast<std::size_t>(s)]);
      t.token_counts.push_back(static_cast<int>(g.integer(1, 16)));
      t.rewards.push_back(g.dyadic(-256, 256));
    }
    const auto ends = t.boundaries();
    const auto returns = rollout::compute_stage_returns(t);
    const auto rewards = rollout::per_token_rewards(t);
    std::size_t begin = 0;
    for (std::size_t s = 0; s < ends.size(); ++s) {
      for (std::size_t k = begin; k < ends[s]; ++k)
        if (returns[k] != t.rewards[s]) fail(o, "return differs from stage reward, trajectory " + std::to_string(i));
      begin = ends[s];
    }
    const std::vector<double> zeros(rewards.size(), 0.0);
    if (rollout::compute_gae(rewards, zeros, ends) != returns) fail(o, "zero-value GAE != returns, trajectory " + std::to_string(i));

    std::vector<double> values(rewards.size());
    for (auto& v : values) v = g.dyadic(-512, 512);
    const auto [gamma, lambda] = gl[i % 4];
    const auto adv = rollout::compute_gae(rewards, values, ends, gamma, lambda);
    if (adv != support::brute_force_gae(rewards, values, ends, gamma, lambda))
      fail(o, "GAE != brute force, trajectory " + std::to_string(i));

    const auto s = static_cast<std::size_t>(g.integer(0, n_stages - 1));
    auto bumped = t;
    bumped.rewards[s] += 1.0;
    const auto adv2 = rollout::compute_gae(rollout::per_token_rewards(bumped), values, ends, gamma, lambda);
    const std::size_t lo = s == 0 ? 0 : ends[s - 1];
    for (std::size_t k = 0; k < adv.size(); ++k)
      if ((k < lo || k >= ends[s]) && adv2[k] != adv[k]) fail(o, "perturbation leaked, trajectory " + std::to_string(i));
  }
  if (o.pass) o.detail = "1000 trajectories";
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome ground_truth_isolation() {
  Outcome o;
  std::vector<dataset::QAItem> items, scrambled;
  backend::MockBackend mock;
  for (int i = 0; i < 50; ++i) {
    const std::string id = "iso" + std::to_string(i);
    items.push_back({id, "Compute " + std::to_string(i) + " + 1.", std::to_string(i + 1)});
    scrambled.push_back({id, items.back().question, std::to_string(1000 - 7 * i)});
    mock.set_fixture("fast", id, "Quick. \\boxed{" + std::to_string(i + (i % 3 == 0 ? 2 : 1)) + "}");
    mock.set_fixture("verify", id, i % 4 == 0 ? "Hmm." : (i % 2 ? "\\boxed{Yes}" : "\\boxed{No}"));
    mock.set_fixture("slow", id, "\nRedo. \\boxed{" + std::to_string(i + 1) + "}\n</think>");
  }
  std::size_t slow_runs = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto a = rollout::run_episode(mock, items[i], task::Mode::Inference, {}, i);
    const auto b = rollout::run_episode(mock, scrambled[i], task::Mode::Inference, {}, i);
    if (a.failed || b.failed) fail(o, "episode failed: " + a.error + b.error);
    if (io::transcript_line(a, false) != io::transcript_line(b, false)) fail(o, "transcripts differ for " + items[i].id);
    slow_runs += a.state.turns().size() == 3;
  }
  if (o.pass) o.detail = "50 fixtures byte-identical (" + std::to_string(slow_runs) + " reached slow)";
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome reward_suite() {
  Outcome o;
  const auto cases = support::reward_cases();
  if (cases.size() < 20) fail(o, "only " + std::to_string(cases.size()) + " cases");
  for (const auto& c : cases) {
    const double got = c.actual();
    if (got != c.formula) fail(o, c.name + fmt(": got %.17g want %.17g", got, c.formula));
    if (!support::within_one_ulp(got, c.decimal)) fail(o, c.name + fmt(": %.17g not within 1 ulp of %.17g", got, c.decimal));
  }
  if (o.pass) o.detail = std::to_string(cases.size()) + " cases exact";
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome grading_corpus() {
  Outcome o;
  const auto& cases = support::grading_cases();
  if (cases.size() < 20) fail(o, "only " + std::to_string(cases.size()) + " cases");
  bool perimeter = false, verdict = false;
  for (const auto& c : cases) {
    const auto msg = support::check_grading_case(c);
    if (!msg.empty()) fail(o, msg);
    perimeter |= c.input.find("\\boxed{18 - 4\\sqrt{3}}") != std::string::npos;
    verdict |= c.input == "$\\boxed{No}$";
  }
  if (!perimeter || !verdict) fail(o, "reference strings missing from corpus");
  static const std::vector<std::string> pieces = {"{", "}", "\\", "\\boxed", "\\boxed{", "\\{", "\\}", "$",
                                                  " ", "x", "1", "/", ".", "\\frac", "\\left", "\\sqrt{"};
  support::Gen g(7);
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const auto n = g.integer(0, 32);
    for (std::int64_t k = 0; k < n; ++k) s += g.pick(pieces);
    try {
      const auto a = grading::extract_boxed(s);
      grading::extract_verdict(s);
      grading::normalize(s);
      if (a) grading::answers_equal(*a, s);
    } catch (const std::exception& e) {
      fail(o, "fuzz input threw: " + std::string(e.what()));
    }
  }
  if (o.pass) o.detail = std::to_string(cases.size()) + " cases, 10000 fuzz strings";
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome wire_conformance() {
  Outcome o;
  support::StubServer server([](const std::string&, const nlohmann::json& body) {
    const auto stage = support::stage_of(body);
    std::string text = "\\boxed{1}";
    if (stage == "fast") text = "\\boxed{41}";
    if (stage == "verify") text = "\\boxed{No}";
    if (stage == "slow") text = "\nRework. \\boxed{42}\n</think>";
    if (stage == "summary") text = "So \\boxed{42}";
    return support::StubServer::Reply{200, support::StubServer::chat_reply(text, 5)};
  });
  backend::HttpConfig cfg;
  cfg.base_url = server.url();
  cfg.api_key_env = "";
  cfg.timeout_s = 5;
  backend::HttpBackend http(cfg);
  const auto t = rollout::run_episode(http, {"w", "What is 6 * 7?", "42"}, task::Mode::Training, {}, 3);
  if (t.failed) {
    fail(o, "episode failed: " + t.error);
    return o;
  }
  const auto bodies = server.bodies();
  const char* want_stage[] = {"fast", "verify", "slow", "summary"};
  const int want_tokens[] = {1000, 2000, 6000, 1000};
  const double want_temp[] = {1.0, 1.0, 1.0, 0.6};
  if (bodies.size() != 4) fail(o, std::to_string(bodies.size()) + " requests, expected 4");
  for (std::size_t i = 0; i < bodies.size() && i < 4; ++i) {
    const auto& b = bodies[i];
    if (support::stage_of(b) != want_stage[i]) fail(o, "request " + std::to_string(i) + " is " + support::stage_of(b));
    if (b.at("max_tokens").get<int>() != want_tokens[i]) fail(o, std::string(want_stage[i]) + " max_tokens " + b.at("max_tokens").dump());
    if (b.at("temperature").get<double>() != want_temp[i]) fail(o, std::string(want_stage[i]) + " temperature " + b.at("temperature").dump());
  }
  if (o.pass) o.detail = "max_tokens 1000/2000/6000/1000, temperature 1/1/1/0.6";
  return o;
}

// 9 -------------------------------------------------------------------------
Outcome determinism() {
  Outcome o;
  sim::SyntheticTaskConfig syn;
  syn.n_items = 50;
  syn.seed = 9;
  const auto items = sim::gen_synthetic(syn).items;
  backend::ScriptedPolicy policy(params(0.5, 0.8, 0.7, 0.6));
  const auto dir = std::filesystem::temp_directory_path() / ("thinker_acc_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto write = [&](std::size_t par) {
    rollout::BatchConfig cfg;
    cfg.samples_per_prompt = 4;  // 200 episodes
    cfg.parallelism = par;
    const auto batch = rollout::run_batch(policy, items, task::Mode::Training, cfg, 123);
    const auto path = dir / ("par" + std::to_string(par) + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    io::TranscriptWriter w(out);
    for (const auto& t : batch.transcripts) w.write(t);
    return path;
  };
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto a = slurp(write(1)), b = slurp(write(16));
  std::filesystem::remove_all(dir);
  if (a.empty()) fail(o, "empty transcript file");
  if (a != b) fail(o, "transcript files differ");
  if (o.pass) o.detail = "200 episodes, " + std::to_string(a.size()) + " bytes identical";
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome mechanism() {
  Outcome o;
  const auto base = params(0.0, 1.0, 0.8, 0.6);
  const auto spec = sim::SweepSpec::parse("p_fast=0:1:0.1");
  const auto rows = sim::sweep(base, spec, 4000, 10);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mc.tokens.value > rows[i - 1].mc.tokens.value)
      fail(o, fmt("tokens rose at p_fast=%.1f: %.1f > %.1f", rows[i].value, rows[i].mc.tokens.value, rows[i - 1].mc.tokens.value));
  }
  sim::SyntheticTaskConfig syn;
  syn.n_items = 50;
  const auto ds = sim::gen_synthetic(syn);
  for (double pf : spec.values()) {
    auto p = base;
    p.p_fast = pf;
    backend::ScriptedPolicy policy(p);
    eval::EvalOptions opts;
    opts.k = 8;
    opts.seed = 10;
    opts.mode = eval::EvalMode::Thinker;
    const double full = eval::evaluate(policy, ds, opts).accuracy;
    opts.mode = eval::EvalMode::ThinkerFast;
    const double fast = eval::evaluate(policy, ds, opts).accuracy;
    if (full < fast) fail(o, fmt("p_fast=%.1f: thinker %.4f < fast %.4f", pf, full, fast));
  }
  if (o.pass)
    o.detail = fmt("tokens %.1f -> %.1f over 11 grid points", rows.front().mc.tokens.value, rows.back().mc.tokens.value);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "transition truth table", 1, truth_table},
      {2, "class-balanced verification reward", 30, class_balance},
      {3, "analytic vs engine agreement", 120, analytic_agreement},
      {4, "stage-local credit assignment", 10, credit_assignment},
      {5, "ground-truth isolation in inference", 5, ground_truth_isolation},
      {6, "reward substitution suite", 1, reward_suite},
      {7, "grading corpus and fuzzing", 10, grading_corpus},
      {8, "wire conformance", 10, wire_conformance},
      {9, "determinism across parallelism", 30, determinism},
      {10, "length/accuracy mechanism", 60, mechanism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      fail(o, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) fail(o, fmt("took %.2fs, budget %.0fs", secs, c.budget_s));
    failures += !o.pass;
    std::printf("[%s] criterion %d: %s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
