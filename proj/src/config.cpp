#include "thinker/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace thinker::config {
namespace {

using task::Stage;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("bad value for " + std::string(key) + ": \"" + std::string(value) + "\" (expected " +
                    std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) bad_value(key, v, "a number");
  return out;
}

template <class Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, v, "true or false");
}

std::optional<double> to_optional_double(std::string_view key, std::string_view v) {
  if (v.empty() || v == "none") return std::nullopt;
  return to_double(key, v);
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t from = 0;
  while (from <= v.size()) {
    const auto comma = v.find(',', from);
    const auto end = comma == std::string_view::npos ? v.size() : comma;
    std::string item = trim(v.substr(from, end - from));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    from = comma + 1;
  }
  return out;
}

// Shortest decimal that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "none"; }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

struct Field {
  std::function<void(EngineConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const EngineConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& fields() {
  static const auto table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add = [&t](std::string key, Field f) { t.emplace_back(std::move(key), std::move(f)); };

    for (Stage s : task::k_all_stages) {
      const std::size_t i = task::index_of(s);
      add("budgets." + std::string(task::stage_key(s)),
          {[i](EngineConfig& c, std::string_view k, std::string_view v) { c.budgets.max_tokens[i] = to_int<int>(k, v); },
           [i](const EngineConfig& c) { return std::to_string(c.budgets.max_tokens[i]); }});
    }
    add("budgets.single_turn",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.budgets.single_turn_max_tokens = to_int<int>(k, v); },
         [](const EngineConfig& c) { return std::to_string(c.budgets.single_turn_max_tokens); }});
    for (Stage s : task::k_all_stages) {
      const std::size_t i = task::index_of(s);
      add("temperature." + std::string(task::stage_key(s)),
          {[i](EngineConfig& c, std::string_view k, std::string_view v) { c.budgets.temperature[i] = to_double(k, v); },
           [i](const EngineConfig& c) { return num(c.budgets.temperature[i]); }});
    }
    add("temperature.single_turn",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.budgets.single_turn_temperature = to_double(k, v); },
         [](const EngineConfig& c) { return num(c.budgets.single_turn_temperature); }});

    add("rewards.c", {[](EngineConfig& c, std::string_view k, std::string_view v) { c.rewards.c = to_double(k, v); },
                      [](const EngineConfig& c) { return num(c.rewards.c); }});
    add("rewards.min_summary_tokens",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.rewards.min_summary_tokens = to_int<int>(k, v); },
         [](const EngineConfig& c) { return std::to_string(c.rewards.min_summary_tokens); }});
    add("rewards.estimator",
        {[](EngineConfig& c, std::string_view k, std::string_view v) {
           if (v == "batch-mean") c.rewards.estimator = rewards::TrailingEstimator::BatchMean;
           else if (v == "ema") c.rewards.estimator = rewards::TrailingEstimator::Ema;
           else bad_value(k, v, "batch-mean or ema");
         },
         [](const EngineConfig& c) {
           return std::string(c.rewards.estimator == rewards::TrailingEstimator::Ema ? "ema" : "batch-mean");
         }});
    add("rewards.ema_decay",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.rewards.ema_decay = to_double(k, v); },
         [](const EngineConfig& c) { return num(c.rewards.ema_decay); }});
    add("rewards.min_batch_for_mean",
        {[](EngineConfig& c, std::string_view k, std::string_view v) {
           c.rewards.min_batch_for_mean = to_int<std::size_t>(k, v);
         },
         [](const EngineConfig& c) { return std::to_string(c.rewards.min_batch_for_mean); }});
    add("rewards.per_token_mean_logprob",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.rewards.per_token_mean_logprob = to_bool(k, v); },
         [](const EngineConfig& c) { return std::string(c.rewards.per_token_mean_logprob ? "true" : "false"); }});

    add("backend.kind",
        {[](EngineConfig& c, std::string_view k, std::string_view v) {
           if (v != "scripted" && v != "mock" && v != "http") bad_value(k, v, "scripted, mock or http");
           c.backend.kind = std::string(v);
         },
         [](const EngineConfig& c) { return c.backend.kind; }});
    add("backend.base_url",
        {[](EngineConfig& c, std::string_view, std::string_view v) { c.backend.http.base_url = std::string(v); },
         [](const EngineConfig& c) { return c.backend.http.base_url; }});
    add("backend.api_prefix",
        {[](EngineConfig& c, std::string_view, std::string_view v) { c.backend.http.api_prefix = std::string(v); },
         [](const EngineConfig& c) { return c.backend.http.api_prefix; }});
    add("backend.model",
        {[](EngineConfig& c, std::string_view, std::string_view v) { c.backend.http.model = std::string(v); },
         [](const EngineConfig& c) { return c.backend.http.model; }});
    add("backend.timeout_s",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.backend.http.timeout_s = to_double(k, v); },
         [](const EngineConfig& c) { return num(c.backend.http.timeout_s); }});
    add("backend.max_in_flight",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.backend.http.max_in_flight = to_int<int>(k, v); },
         [](const EngineConfig& c) { return std::to_string(c.backend.http.max_in_flight); }});
    add("backend.max_attempts",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.backend.http.max_attempts = to_int<int>(k, v); },
         [](const EngineConfig& c) { return std::to_string(c.backend.http.max_attempts); }});
    add("backend.backoff_initial_s",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.backend.http.backoff_initial_s = to_double(k, v); },
         [](const EngineConfig& c) { return num(c.backend.http.backoff_initial_s); }});
    add("backend.api_key_env",
        {[](EngineConfig& c, std::string_view, std::string_view v) { c.backend.http.api_key_env = std::string(v); },
         [](const EngineConfig& c) { return c.backend.http.api_key_env; }});
    add("backend.scoring",
        {[](EngineConfig& c, std::string_view k, std::string_view v) {
           if (v != "none" && v != "echo") bad_value(k, v, "none or echo");
           c.backend.http.scoring = std::string(v);
         },
         [](const EngineConfig& c) { return c.backend.http.scoring; }});
    add("backend.fixtures",
        {[](EngineConfig& c, std::string_view, std::string_view v) { c.backend.fixtures = std::string(v); },
         [](const EngineConfig& c) { return c.backend.fixtures; }});
    add("backend.mock_logprob",
        {[](EngineConfig& c, std::string_view k, std::string_view v) { c.backend.mock_logprob = to_optional_double(k, v); },
         [](const EngineConfig& c) { return opt_num(c.backend.mock_logprob); }});

    auto policy_double = [&add](const char* name, double backend::PolicyParams::*member) {
      add(std::string("policy.") + name,
          {[member](EngineConfig& c, std::string_view k, std::string_view v) { c.policy.*member = to_double(k, v); },
           [member](const EngineConfig& c) { return num(c.policy.*member); }});
    };
    auto policy_opt = [&add](const char* name, std::optional<double> backend::PolicyParams::*member) {
      add(std::string("policy.") + name,
          {[member](EngineConfig& c, std::string_view k, std::string_view v) { c.policy.*member = to_optional_double(k, v); },
           [member](const EngineConfig& c) { return opt_num(c.policy.*member); }});
    };
    auto policy_int = [&add](const char* name, int backend::PolicyParams::*member) {
      add(std::string("policy.") + name,
          {[member](EngineConfig& c, std::string_view k, std::string_view v) { c.policy.*member = to_int<int>(k, v); },
           [member](const EngineConfig& c) { return std::to_string(c.policy.*member); }});
    };
    policy_double("p_fast", &backend::PolicyParams::p_fast);
    policy_double("t_p", &backend::PolicyParams::t_p);
    policy_double("t_n", &backend::PolicyParams::t_n);
    policy_double("p_slow", &backend::PolicyParams::p_slow);
    policy_opt("p_slow_after_false_reject", &backend::PolicyParams::p_slow_after_false_reject);
    policy_opt("p_single", &backend::PolicyParams::p_single);
    policy_int("fast_tokens", &backend::PolicyParams::fast_tokens);
    policy_int("verify_tokens", &backend::PolicyParams::verify_tokens);
    policy_int("slow_tokens", &backend::PolicyParams::slow_tokens);
    policy_int("summary_tokens", &backend::PolicyParams::summary_tokens);
    policy_double("logprob_per_token", &backend::PolicyParams::logprob_per_token);

    auto rollout_size = [&add](const char* name, std::size_t RolloutSettings::*member) {
      add(std::string("rollout.") + name,
          {[member](EngineConfig& c, std::string_view k, std::string_view v) {
             c.rollout.*member = to_int<std::size_t>(k, v);
           },
           [member](const EngineConfig& c) { return std::to_string(c.rollout.*member); }});
    };
    rollout_size("parallelism", &RolloutSettings::parallelism);
    rollout_size("samples_per_prompt", &RolloutSettings::samples_per_prompt);
    rollout_size("batch_size", &RolloutSettings::batch_size);

    add("eval.k", {[](EngineConfig& c, std::string_view k, std::string_view v) { c.eval.k = to_int<std::size_t>(k, v); },
                   [](const EngineConfig& c) { return std::to_string(c.eval.k); }});
    add("eval.vocab", {[](EngineConfig& c, std::string_view, std::string_view v) { c.eval.vocab = to_list(v); },
                       [](const EngineConfig& c) { return join(c.eval.vocab); }});
    add("eval.modes",
        {[](EngineConfig& c, std::string_view k, std::string_view v) {
           auto modes = to_list(v);
           for (const auto& m : modes) {
             if (m != "thinker" && m != "thinker-fast" && m != "single-turn") {
               bad_value(k, m, "thinker, thinker-fast or single-turn");
             }
           }
           c.eval.modes = std::move(modes);
         },
         [](const EngineConfig& c) { return join(c.eval.modes); }});

    add("seed", {[](EngineConfig& c, std::string_view k, std::string_view v) { c.seed = to_int<std::uint64_t>(k, v); },
                 [](const EngineConfig& c) { return std::to_string(c.seed); }});
    return t;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return &f;
  }
  return nullptr;
}

}  // namespace

void EngineConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  wrap([&] { budgets.validate(); });
  wrap([&] { rewards.validate(); });
  wrap([&] { policy.validate(); });
  if (backend.kind == "http") wrap([&] { backend.http.validate(); });
  if (backend.kind == "mock" && backend.fixtures.empty()) throw ConfigError("backend.fixtures is required for mock");
  if (backend.mock_logprob && *backend.mock_logprob > 0.0) throw ConfigError("backend.mock_logprob must be <= 0");
  if (rollout.parallelism == 0) throw ConfigError("rollout.parallelism must be positive");
  if (rollout.samples_per_prompt == 0) throw ConfigError("rollout.samples_per_prompt must be positive");
  if (rollout.batch_size == 0) throw ConfigError("rollout.batch_size must be positive");
  if (eval.k == 0) throw ConfigError("eval.k must be positive");
  if (eval.vocab.empty()) throw ConfigError("eval.vocab must not be empty");
  if (eval.modes.empty()) throw ConfigError("eval.modes must not be empty");
}

const std::vector<std::string>& known_keys() {
  static const auto keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return keys;
}

void apply_setting(EngineConfig& cfg, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key: " + std::string(key));
  f->set(cfg, key, trim(value));
}

EngineConfig parse_config(std::string_view text, const EngineConfig& base) {
  EngineConfig cfg = base;
  std::size_t line_no = 0;
  std::size_t from = 0;
  while (from <= text.size()) {
    const auto nl = text.find('\n', from);
    std::string_view line = text.substr(from, nl == std::string_view::npos ? std::string_view::npos : nl - from);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (!stripped.empty()) {
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      }
      try {
        apply_setting(cfg, trim(stripped.substr(0, eq)), stripped.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    from = nl + 1;
  }
  cfg.validate();
  return cfg;
}

EngineConfig load_config(const std::filesystem::path& path, const EngineConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string render_config(const EngineConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : fields()) {
    out += name;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

std::string config_hash(const EngineConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : render_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace thinker::config
