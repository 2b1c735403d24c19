#include "thinker/http_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace thinker::backend {
namespace {

using nlohmann::json;

class InFlightGuard {
 public:
  explicit InFlightGuard(std::counting_semaphore<1 << 16>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightGuard() { sem_.release(); }
  InFlightGuard(const InFlightGuard&) = delete;
  InFlightGuard& operator=(const InFlightGuard&) = delete;

 private:
  std::counting_semaphore<1 << 16>& sem_;
};

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::chrono::microseconds to_micros(double seconds) {
  return std::chrono::microseconds(static_cast<std::int64_t>(seconds * 1e6));
}

}  // namespace

void HttpConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("backend.base_url is empty");
  if (model.empty()) throw std::invalid_argument("backend.model is empty");
  if (!(timeout_s > 0.0)) throw std::invalid_argument("backend.timeout_s must be positive");
  if (max_in_flight <= 0) throw std::invalid_argument("backend.max_in_flight must be positive");
  if (max_attempts <= 0) throw std::invalid_argument("backend.max_attempts must be positive");
  if (!(backoff_initial_s >= 0.0)) throw std::invalid_argument("backend.backoff_initial_s must be >= 0");
  if (scoring != "none" && scoring != "echo") throw std::invalid_argument("backend.scoring must be none or echo");
}

HttpBackend::HttpBackend(HttpConfig cfg, const Tokenizer& tokenizer)
    : cfg_(std::move(cfg)), tokenizer_(tokenizer), in_flight_(0) {
  cfg_.validate();
  in_flight_.release(cfg_.max_in_flight);
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) api_key_ = key;
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const { return "http:" + cfg_.model; }

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
  InFlightGuard guard(in_flight_);

  std::string last_error;
  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(to_micros(cfg_.backoff_initial_s * std::pow(2.0, attempt - 1)));
    }

    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(to_micros(cfg_.timeout_s));
    client.set_read_timeout(to_micros(cfg_.timeout_s));
    client.set_write_timeout(to_micros(cfg_.timeout_s));
    httplib::Headers headers;
    if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

    auto res = client.Post(cfg_.api_prefix + path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
    if (!retryable_status(res->status)) break;
  }
  throw BackendError("POST " + cfg_.api_prefix + path + " failed: " + last_error);
}

GenerationResult HttpBackend::generate(const GenerationRequest& request) {
  request.validate();

  json body;
  body["model"] = cfg_.model;
  body["messages"] = json::array();
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  if (!request.assistant_prefix.empty()) {
    body["messages"].push_back({{"role", "assistant"}, {"content", request.assistant_prefix}});
    body["continue_final_message"] = true;
    body["add_generation_prompt"] = false;
  }
  body["max_tokens"] = request.max_tokens;
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;

  const std::string reply = post_json("/chat/completions", body.dump());

  try {
    const json doc = json::parse(reply);
    const auto& choice = doc.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (!content.is_string()) throw BackendError("chat completion has no text content");

    GenerationResult result = enforce_budget(content.get<std::string>(), request.max_tokens, tokenizer_);
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->contains("completion_tokens")) {
      result.token_count = std::min(usage->at("completion_tokens").get<int>(), request.max_tokens);
    }
    if (auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string() && *fr == "length") {
      result.finish_reason = FinishReason::Length;
    }
    if (result.finish_reason == FinishReason::Length) result.token_count = request.max_tokens;

    if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object() && lp->contains("content") &&
                                           lp->at("content").is_array()) {
      double sum = 0.0;
      for (const auto& tok : lp->at("content")) sum += tok.at("logprob").get<double>();
      result.logprob_sum = std::min(sum, 0.0);
    }
    return result;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat completion reply: ") + e.what());
  }
}

std::string flatten_dialogue(const std::vector<Message>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += m.role == "user" ? "User: " : "Assistant: ";
    out += m.content;
    out += '\n';
  }
  out += "Assistant: ";
  return out;
}

double HttpBackend::score_logprob(const std::vector<Message>& prompt, std::string_view completion) {
  if (!can_score()) throw CapabilityAbsent("backend " + id() + " has no log-probability scoring");
  if (completion.empty()) return 0.0;

  const std::string context = flatten_dialogue(prompt);
  json body;
  body["model"] = cfg_.model;
  body["prompt"] = context + std::string(completion);
  body["echo"] = true;
  body["logprobs"] = 0;
  body["max_tokens"] = 1;
  body["temperature"] = 0.0;

  const std::string reply = post_json("/completions", body.dump());
  try {
    const json doc = json::parse(reply);
    const auto& lp = doc.at("choices").at(0).at("logprobs");
    const auto& values = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    if (values.size() != offsets.size()) throw BackendError("echo reply has mismatched logprob arrays");
    const std::size_t begin = context.size();
    const std::size_t end = begin + completion.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto offset = offsets[i].get<std::size_t>();
      if (offset < begin || offset >= end || values[i].is_null()) continue;
      sum += values[i].get<double>();
    }
    return std::min(sum, 0.0);
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed echo reply: ") + e.what());
  }
}

}  // namespace thinker::backend
