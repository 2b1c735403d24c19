// thinker: command-line driver for the four-stage QA environment.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "thinker/backend.hpp"
#include "thinker/config.hpp"
#include "thinker/dataset.hpp"
#include "thinker/eval.hpp"
#include "thinker/grading.hpp"
#include "thinker/http_backend.hpp"
#include "thinker/rollout.hpp"
#include "thinker/seed.hpp"
#include "thinker/sim.hpp"
#include "thinker/transcript_io.hpp"

namespace {

using namespace thinker;

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kBackend = 4, kIo = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> sets;
  bool print_config = false;

  // Shorthands for common --set keys; applied last.
  std::optional<std::string> backend;
  std::optional<double> p_fast, t_p, t_n, p_slow;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> base_url, model, fixtures;
};

config::EngineConfig build_config(const GlobalOptions& g) {
  config::EngineConfig cfg;
  if (!g.config_path.empty()) cfg = config::load_config(g.config_path);
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got \"" + s + "\"");
    config::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  auto set = [&cfg](const char* key, const auto& v) {
    if (!v) return;
    std::ostringstream os;
    os.precision(17);
    os << *v;
    config::apply_setting(cfg, key, os.str());
  };
  set("backend.kind", g.backend);
  set("policy.p_fast", g.p_fast);
  set("policy.t_p", g.t_p);
  set("policy.t_n", g.t_n);
  set("policy.p_slow", g.p_slow);
  set("seed", g.seed);
  set("rollout.parallelism", g.parallelism);
  set("backend.base_url", g.base_url);
  set("backend.model", g.model);
  set("backend.fixtures", g.fixtures);
  cfg.validate();
  return cfg;
}

std::unique_ptr<backend::Backend> make_backend(const config::EngineConfig& cfg) {
  if (cfg.backend.kind == "scripted") return std::make_unique<backend::ScriptedPolicy>(cfg.policy);
  if (cfg.backend.kind == "mock") {
    auto mock = std::make_unique<backend::MockBackend>();
    mock->load_fixtures(cfg.backend.fixtures);
    mock->set_logprob(cfg.backend.mock_logprob);
    return mock;
  }
  return std::make_unique<backend::HttpBackend>(cfg.backend.http);
}

task::Mode parse_mode(const std::string& s) {
  const auto m = task::mode_from_key(s);
  if (!m) throw UsageError("unknown mode \"" + s + "\" (expected training or inference)");
  return *m;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw IoError("cannot open " + path + " for writing");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
};

int run_grade(const std::string& input) {
  std::ifstream file;
  if (!input.empty() && input != "-") {
    file.open(input);
    if (!file) throw IoError("cannot read " + input);
  }
  std::istream& in = file.is_open() ? static_cast<std::istream&>(file) : std::cin;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      const auto response = rec.at("response").get<std::string>();
      const auto answer = rec.at("answer").get<std::string>();
      const auto extracted = grading::extract_boxed(response);
      nlohmann::ordered_json out;
      out["extracted"] = extracted ? nlohmann::ordered_json(extracted->raw) : nlohmann::ordered_json(nullptr);
      out["canonical"] = extracted ? nlohmann::ordered_json(extracted->canonical) : nlohmann::ordered_json(nullptr);
      out["verdict"] = grading::to_string(grading::extract_verdict(response));
      out["correct"] = extracted && grading::answers_equal(*extracted, answer);
      std::cout << out.dump() << '\n';
    } catch (const nlohmann::json::exception& e) {
      throw IoError("stdin:" + std::to_string(line_no) + ": expected {\"response\", \"answer\"}: " + e.what());
    }
  }
  return kOk;
}

dataset::QAItem pick_item(const std::string& dataset_path, const std::string& item_id, std::size_t index,
                          std::uint64_t seed) {
  if (dataset_path.empty()) {
    sim::SyntheticTaskConfig syn;
    syn.n_items = index + 1;
    syn.seed = seed;
    return sim::gen_synthetic(syn).items[index];
  }
  const auto ds = dataset::load_dataset(dataset_path);
  if (!item_id.empty()) {
    for (const auto& it : ds.items) {
      if (it.id == item_id) return it;
    }
    throw UsageError("no item with id \"" + item_id + "\" in " + dataset_path);
  }
  if (index >= ds.size()) throw UsageError("item index out of range");
  return ds.items[index];
}

dataset::Dataset require_dataset(const std::string& path, const char* cmd) {
  if (path.empty()) throw UsageError(std::string(cmd) + " needs --dataset");
  return dataset::load_dataset(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Four-stage question answering environment: grading, rollouts, evaluation and simulation"};
  // --print-config works on its own; everything else needs a subcommand.
  app.require_subcommand(0, 1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Config file (key = value lines)");
  app.add_option("--set", g.sets, "Override a config key: key=value (repeatable)");
  app.add_flag("--print-config", g.print_config, "Print the effective config and exit");
  app.add_option("--backend", g.backend, "scripted, mock or http");
  app.add_option("--p-fast", g.p_fast, "Scripted policy: P(fast answer correct)");
  app.add_option("--t-p", g.t_p, "Scripted policy: P(Yes | fast correct)");
  app.add_option("--t-n", g.t_n, "Scripted policy: P(No | fast wrong)");
  app.add_option("--p-slow", g.p_slow, "Scripted policy: P(slow answer correct)");
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--parallelism", g.parallelism, "Concurrent episodes");
  app.add_option("--base-url", g.base_url, "HTTP backend base URL");
  app.add_option("--model", g.model, "HTTP backend model name");
  app.add_option("--fixtures", g.fixtures, "Mock backend fixture file");

  auto* grade = app.add_subcommand("grade", "Grade JSONL {response, answer} records from stdin");
  std::string grade_input;
  grade->add_option("--input", grade_input, "Read records from a file instead of stdin");

  auto* episode = app.add_subcommand("episode", "Run one episode and print its transcript");
  std::string ep_mode = "inference", ep_dataset, ep_item;
  std::size_t ep_index = 0;
  bool ep_fast_only = false;
  episode->add_option("--mode", ep_mode, "training or inference");
  episode->add_option("--dataset", ep_dataset, "Dataset file (default: one synthetic item)");
  episode->add_option("--item", ep_item, "Item id within the dataset");
  episode->add_option("--index", ep_index, "Item index within the dataset");
  episode->add_flag("--fast-only", ep_fast_only, "Stop after Fast Thinking");

  auto* rollout_cmd = app.add_subcommand("rollout", "Run rollout batches and write scored transcripts");
  std::string ro_mode = "training", ro_dataset, ro_out;
  std::size_t ro_batches = 1;
  std::optional<std::size_t> ro_batch_size, ro_samples;
  rollout_cmd->add_option("--mode", ro_mode, "training or inference");
  rollout_cmd->add_option("--dataset", ro_dataset, "Dataset file")->required();
  rollout_cmd->add_option("--out", ro_out, "Transcript file (default stdout)");
  rollout_cmd->add_option("--batches", ro_batches, "Number of batches")->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--batch-size", ro_batch_size, "Prompts per batch")->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--samples", ro_samples, "Samples per prompt")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("eval", "Benchmark Pass@1 over k samples per question");
  std::string ev_mode, ev_dataset, ev_out, ev_transcripts;
  std::optional<std::size_t> ev_k;
  eval_cmd->add_option("--mode", ev_mode, "thinker, thinker-fast or single-turn (default: eval.modes)");
  eval_cmd->add_option("--dataset", ev_dataset, "Dataset file")->required();
  eval_cmd->add_option("--k", ev_k, "Samples per question")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ev_out, "Report file, one JSON report per line");
  eval_cmd->add_option("--transcripts", ev_transcripts, "Also write every sample transcript here");

  auto* sim_cmd = app.add_subcommand("simulate", "Analytic and Monte Carlo model of the scripted policy");
  std::string sim_sweep, sim_out;
  std::size_t sim_episodes = 10000;
  sim_cmd->add_option("--sweep", sim_sweep, "name=start:stop:step over a policy parameter");
  sim_cmd->add_option("--episodes", sim_episodes, "Episodes per point")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sim_out, "Tab-separated output (default stdout)");

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic arithmetic dataset");
  sim::SyntheticTaskConfig gen;
  std::string gen_out;
  gen_cmd->add_option("--n", gen.n_items, "Number of items");
  gen_cmd->add_option("--min-operands", gen.min_operands, "Fewest operands per question");
  gen_cmd->add_option("--max-operands", gen.max_operands, "Most operands per question");
  gen_cmd->add_option("--bound", gen.operand_bound, "Largest operand");
  gen_cmd->add_option("--out", gen_out, "Dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const config::EngineConfig cfg = build_config(g);
    if (g.print_config) {
      std::cout << config::render_config(cfg);
      return kOk;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help() << "thinker: a subcommand is required\n";
      return kUsage;
    }
    const std::string hash = config::config_hash(cfg);

    if (grade->parsed()) return run_grade(grade_input);

    if (episode->parsed()) {
      auto be = make_backend(cfg);
      const auto item = pick_item(ep_dataset, ep_item, ep_index, cfg.seed);
      auto t = rollout::run_episode(*be, item, parse_mode(ep_mode), cfg.budgets, rollout::episode_seed(cfg.seed, 0),
                                    ep_fast_only ? task::Variant::FastOnly : task::Variant::Full);
      t.config_hash = hash;
      rollout::score_transcript(t, {}, cfg.rewards);
      std::cout << io::transcript_to_json(t).dump(2) << '\n';
      if (t.failed) {
        std::cerr << "thinker: episode failed: " << t.error << '\n';
        return kBackend;
      }
      return kOk;
    }

    if (rollout_cmd->parsed()) {
      auto be = make_backend(cfg);
      const auto ds = require_dataset(ro_dataset, "rollout");
      rollout::BatchConfig bc;
      bc.budgets = cfg.budgets;
      bc.rewards = cfg.rewards;
      bc.parallelism = cfg.rollout.parallelism;
      bc.samples_per_prompt = ro_samples.value_or(cfg.rollout.samples_per_prompt);
      const std::size_t batch_size = ro_batch_size.value_or(cfg.rollout.batch_size);
      const task::Mode mode = parse_mode(ro_mode);

      Output out(ro_out);
      io::TranscriptWriter writer(out.stream());
      rewards::TrailingAccuracy trailing;
      for (std::size_t b = 0; b < ro_batches; ++b) {
        const auto items = dataset::sample_batch(ds, batch_size, derive_seed(cfg.seed, {0x62617463ULL, b}));
        auto batch = rollout::run_batch(*be, items, mode, bc, derive_seed(cfg.seed, {b}), trailing);
        trailing = batch.trailing;
        for (auto& t : batch.transcripts) {
          t.config_hash = hash;
          writer.write(t);
        }
        const auto& s = batch.stats;
        std::fprintf(stderr,
                     "batch %zu: episodes=%zu failed=%zu trailing_p=%.4f fast_acc=%.4f final_acc=%.4f "
                     "mean_tokens=%.1f\n",
                     b, s.episodes, s.failed, trailing.p, s.fast_accuracy, s.final_accuracy, s.mean_total_tokens);
      }
      out.finish();
      return kOk;
    }

    if (eval_cmd->parsed()) {
      auto be = make_backend(cfg);
      const auto ds = require_dataset(ev_dataset, "eval");
      std::vector<std::string> modes = ev_mode.empty() ? cfg.eval.modes : std::vector<std::string>{ev_mode};

      Output out(ev_out);
      std::optional<Output> transcripts_out;
      std::optional<io::TranscriptWriter> writer;
      if (!ev_transcripts.empty()) {
        transcripts_out.emplace(ev_transcripts);
        writer.emplace(transcripts_out->stream());
      }
      for (const auto& m : modes) {
        const auto mode = eval::eval_mode_from_key(m);
        if (!mode) throw UsageError("unknown eval mode \"" + m + "\"");
        eval::EvalOptions opts;
        opts.mode = *mode;
        opts.k = ev_k.value_or(cfg.eval.k);
        opts.budgets = cfg.budgets;
        opts.seed = cfg.seed;
        opts.parallelism = cfg.rollout.parallelism;
        opts.vocab.terms = cfg.eval.vocab;
        opts.vocab.validate();

        auto samples = eval::run_samples(*be, ds, opts);
        for (auto& t : samples) t.config_hash = hash;
        if (writer) {
          for (const auto& t : samples) writer->write(t);
        }
        const auto report = eval::aggregate(samples, opts.mode, opts.k, opts.vocab);
        for (const auto& id : report.excluded) {
          std::cerr << "thinker: warning: every sample failed for question " << id << "; excluded\n";
        }
        if (!ev_out.empty()) out.stream() << io::report_to_json(report, hash).dump() << '\n';
        std::cout << eval::format_report(report);
        if (modes.size() > 1) std::cout << '\n';
        if (report.questions.empty()) throw backend::BackendError("every evaluation sample failed");
      }
      if (!ev_out.empty()) out.finish();
      if (transcripts_out) transcripts_out->finish();
      return kOk;
    }

    if (sim_cmd->parsed()) {
      Output out(sim_out);
      if (!sim_sweep.empty()) {
        const auto spec = sim::SweepSpec::parse(sim_sweep);
        const auto rows = sim::sweep(cfg.policy, spec, sim_episodes, cfg.seed, cfg.budgets, cfg.rollout.parallelism);
        out.stream() << "# config_hash " << hash << '\n' << sim::format_sweep(spec, rows);
      } else {
        const auto mc = sim::monte_carlo(cfg.policy, sim_episodes, cfg.seed, cfg.budgets, cfg.rollout.parallelism);
        const double a = sim::analytic_accuracy(cfg.policy);
        const double l = sim::analytic_expected_tokens(cfg.policy, sim::scripted_lengths(cfg.policy, cfg.budgets));
        out.stream() << "# config_hash " << hash << '\n'
                     << "quantity\tanalytic\tmonte_carlo\tstd_error\tepisodes\n"
                     << "accuracy\t" << a << '\t' << mc.accuracy.value << '\t' << mc.accuracy.std_error << '\t'
                     << mc.accuracy.n << '\n'
                     << "tokens\t" << l << '\t' << mc.tokens.value << '\t' << mc.tokens.std_error << '\t'
                     << mc.tokens.n << '\n';
      }
      out.finish();
      return kOk;
    }

    if (gen_cmd->parsed()) {
      gen.seed = cfg.seed;
      dataset::write_dataset(sim::gen_synthetic(gen), gen_out);
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "thinker: " << e.what() << '\n';
    return kUsage;
  } catch (const config::ConfigError& e) {
    std::cerr << "thinker: config: " << e.what() << '\n';
    return kConfig;
  } catch (const backend::BackendError& e) {
    std::cerr << "thinker: backend: " << e.what() << '\n';
    return kBackend;
  } catch (const dataset::DatasetError& e) {
    std::cerr << "thinker: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "thinker: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "thinker: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "thinker: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
