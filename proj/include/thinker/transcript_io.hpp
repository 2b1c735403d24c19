#pragma once

#include <iosfwd>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "thinker/eval.hpp"
#include "thinker/rollout.hpp"
#include "thinker/sim.hpp"

namespace thinker::io {

inline constexpr const char* k_transcript_schema = "thinker.transcript/1";
inline constexpr const char* k_report_schema = "thinker.report/1";

/// Record fields: schema, episode_id, mode, variant, item_id, seed, backend,
/// config_hash, failed, error, stages[{stage, prompt, response, token_count,
/// finish_reason, truncated, extracted, verdict}], final_stage,
/// final_answer. With `include_scoring`, also rewards per stage,
/// stage returns, summary_logprob, fast_correct and correct.
nlohmann::ordered_json transcript_to_json(const rollout::Transcript& t, bool include_scoring = true);

/// One JSON object on a single line, no trailing newline.
std::string transcript_line(const rollout::Transcript& t, bool include_scoring = true);

nlohmann::ordered_json report_to_json(const eval::BenchmarkReport& report, const std::string& config_hash);

/// Serializes appends from concurrent writers; one record per line.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(std::ostream& out) : out_(out) {}

  void write(const rollout::Transcript& t, bool include_scoring = true);

 private:
  std::ostream& out_;
  std::mutex mu_;
};

}  // namespace thinker::io
