#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinker/backend.hpp"
#include "thinker/http_backend.hpp"
#include "thinker/rewards.hpp"
#include "thinker/task.hpp"

namespace thinker::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendSettings {
  /// "scripted", "mock" or "http".
  std::string kind = "scripted";
  backend::HttpConfig http;
  /// JSONL fixture file for the mock backend.
  std::string fixtures;
  std::optional<double> mock_logprob;
};

struct RolloutSettings {
  std::size_t parallelism = 1;
  std::size_t samples_per_prompt = 32;
  std::size_t batch_size = 128;
};

struct EvalSettings {
  std::size_t k = 16;
  std::vector<std::string> vocab = {"wait", "however", "alternatively"};
  std::vector<std::string> modes = {"thinker"};
};

/// Everything a run needs. Defaults reproduce the published setup:
/// budgets 1000/2000/6000/1000, temperature 0.6 for summarization and 1
/// elsewhere, c = 1e-3, minimum summary length 300, 32 samples per prompt,
/// batches of 128 prompts, Pass@1 over 16 samples.
struct EngineConfig {
  task::StageBudgets budgets;
  rewards::RewardConfig rewards;
  BackendSettings backend;
  backend::PolicyParams policy;
  RolloutSettings rollout;
  EvalSettings eval;
  std::uint64_t seed = 0;

  /// Throws ConfigError describing the first invalid value.
  void validate() const;
};

/// Every recognized key, in render order.
const std::vector<std::string>& known_keys();

/// Assigns `value` to dotted `key`. Throws ConfigError naming the key
/// when it is unknown or the value does not parse.
void apply_setting(EngineConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key = value" lines ('#' starts a comment). Keys are applied in
/// order on top of `base`; the result is validated.
EngineConfig parse_config(std::string_view text, const EngineConfig& base = {});
EngineConfig load_config(const std::filesystem::path& path, const EngineConfig& base = {});

/// Canonical "key = value" rendering of every setting; parse_config of
/// the output reproduces the config.
std::string render_config(const EngineConfig& cfg);

/// 16 hex digits of FNV-1a over render_config(cfg).
std::string config_hash(const EngineConfig& cfg);

}  // namespace thinker::config
