#include "thinker/backend.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace thinker::backend {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

void GenerationRequest::validate() const {
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
  if (messages.empty()) throw std::invalid_argument("request has no messages");
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const char* expected = i % 2 == 0 ? "user" : "assistant";
    if (messages[i].role != expected) {
      throw std::invalid_argument("message " + std::to_string(i) + " has role \"" + messages[i].role +
                                  "\", expected \"" + expected + "\"");
    }
  }
  if (messages.back().role != "user") throw std::invalid_argument("last message must be a user prompt");
}

task::StageResponse GenerationResult::as_stage_response(std::string_view prefix) const {
  task::StageResponse r;
  r.text.reserve(prefix.size() + text.size());
  r.text.append(prefix);
  r.text.append(text);
  r.token_count = token_count;
  r.finish_reason = finish_reason;
  return r;
}

int WhitespaceTokenizer::count(std::string_view text) const {
  int n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::string_view WhitespaceTokenizer::truncate(std::string_view text, int max_tokens) const {
  if (max_tokens <= 0) return text.substr(0, 0);
  int n = 0;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_space(text[i])) {
      if (in_word && n == max_tokens) return text.substr(0, i);
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return text;
}

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer tok;
  return tok;
}

GenerationResult enforce_budget(std::string text, int max_tokens, const Tokenizer& tokenizer) {
  GenerationResult r;
  const int n = tokenizer.count(text);
  if (n > max_tokens) {
    r.text = std::string(tokenizer.truncate(text, max_tokens));
    r.token_count = max_tokens;
    r.finish_reason = FinishReason::Length;
  } else {
    r.text = std::move(text);
    r.token_count = n;
    r.finish_reason = FinishReason::Stop;
  }
  return r;
}

double Backend::score_logprob(const std::vector<Message>&, std::string_view) {
  throw CapabilityAbsent("backend " + id() + " cannot score completions");
}

void MockBackend::set_fixture(std::string_view key, std::string_view item_id, std::string text) {
  std::lock_guard lock(mu_);
  fixtures_[{std::string(key), std::string(item_id)}] = std::move(text);
}

void MockBackend::load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot read fixture file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      set_fixture(rec.at("key").get<std::string>(), rec.at("item_id").get<std::string>(),
                  rec.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(path + ":" + std::to_string(line_no) + ": bad fixture record: " + e.what());
    }
  }
}

GenerationResult MockBackend::generate(const GenerationRequest& request) {
  request.validate();
  if (!request.tag) throw FixtureMissing("mock backend needs a tagged request");
  const auto& tag = *request.tag;
  std::string text;
  {
    std::lock_guard lock(mu_);
    calls_.push_back(Call{tag.key, tag.item.id, request.max_tokens, request.temperature, request.messages});
    auto it = fixtures_.find(std::pair{tag.key, tag.item.id});
    if (it == fixtures_.end()) {
      throw FixtureMissing("no fixture for (" + tag.key + ", " + tag.item.id + ")");
    }
    text = it->second;
  }
  return enforce_budget(std::move(text), request.max_tokens, default_tokenizer());
}

double MockBackend::score_logprob(const std::vector<Message>&, std::string_view completion) {
  if (!logprob_) throw CapabilityAbsent("mock backend has no configured log-probability");
  if (completion.empty()) return 0.0;
  return *logprob_;
}

std::vector<MockBackend::Call> MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

void MockBackend::clear_calls() {
  std::lock_guard lock(mu_);
  calls_.clear();
}

}  // namespace thinker::backend
