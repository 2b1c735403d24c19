#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "../support/http_stub.hpp"
#include "doctest.h"
#include "thinker/http_backend.hpp"
#include "thinker/rollout.hpp"

using namespace thinker;
using namespace thinker::backend;
using support::StubServer;

namespace {

HttpConfig config_for(const StubServer& s) {
  HttpConfig c;
  c.base_url = s.url();
  c.model = "stub-model";
  c.timeout_s = 5.0;
  c.backoff_initial_s = 0.01;
  c.api_key_env = "THINKER_TEST_KEY";
  return c;
}

GenerationRequest simple_request(int max_tokens = 100) {
  GenerationRequest r;
  r.messages = {{"user", "hello"}};
  r.max_tokens = max_tokens;
  r.temperature = 0.6;
  r.seed = 17;
  return r;
}

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("request body and reply parsing") {
    StubServer server([](const std::string&, const nlohmann::json&) {
      return StubServer::Reply{200, StubServer::chat_reply("answer \\boxed{3}", 12)};
    });
    HttpBackend be(config_for(server));
    const auto r = be.generate(simple_request());
    CHECK(r.text == "answer \\boxed{3}");
    CHECK(r.token_count == 12);
    CHECK(r.finish_reason == FinishReason::Stop);
    CHECK(be.id() == "http:stub-model");

    const auto bodies = server.bodies();
    REQUIRE(bodies.size() == 1);
    CHECK(server.paths()[0] == "/v1/chat/completions");
    CHECK(bodies[0]["model"] == "stub-model");
    CHECK(bodies[0]["max_tokens"] == 100);
    CHECK(bodies[0]["temperature"].get<double>() == 0.6);
    CHECK(bodies[0]["seed"] == 17);
    CHECK(bodies[0]["messages"].size() == 1);
    CHECK(bodies[0]["messages"][0]["role"] == "user");
    CHECK_FALSE(bodies[0].contains("continue_final_message"));
  }

  TEST_CASE("prefill is sent as a trailing assistant message") {
    StubServer server([](const std::string&, const nlohmann::json&) {
      return StubServer::Reply{200, StubServer::chat_reply("\nthinking", 1)};
    });
    HttpBackend be(config_for(server));
    auto req = simple_request();
    req.assistant_prefix = "<think>";
    const auto r = be.generate(req);
    CHECK(r.as_stage_response(req.assistant_prefix).text == "<think>\nthinking");
    const auto body = server.bodies().at(0);
    CHECK(body["messages"].back()["role"] == "assistant");
    CHECK(body["messages"].back()["content"] == "<think>");
    CHECK(body["continue_final_message"] == true);
    CHECK(body["add_generation_prompt"] == false);
  }

  TEST_CASE("length finish pins token_count to the budget; missing usage falls back to the tokenizer") {
    StubServer server([](const std::string&, const nlohmann::json& body) {
      if (body["max_tokens"] == 5) return StubServer::Reply{200, StubServer::chat_reply("a b c d e", 5, "length")};
      nlohmann::json j;
      j["choices"] = {{{"message", {{"content", "one two three"}}}, {"finish_reason", "stop"}}};
      return StubServer::Reply{200, j.dump()};
    });
    HttpBackend be(config_for(server));
    const auto cut = be.generate(simple_request(5));
    CHECK(cut.finish_reason == FinishReason::Length);
    CHECK(cut.token_count == 5);
    const auto plain = be.generate(simple_request(50));
    CHECK(plain.token_count == 3);
    // Server ignored the budget: the client enforces it.
    const auto over = be.generate(simple_request(2));
    CHECK(over.token_count == 2);
    CHECK(over.finish_reason == FinishReason::Length);
  }

  TEST_CASE("retries 5xx and 429, then succeeds") {
    std::atomic<int> calls{0};
    StubServer server([&](const std::string&, const nlohmann::json&) {
      const int n = ++calls;
      if (n == 1) return StubServer::Reply{503, "{}"};
      if (n == 2) return StubServer::Reply{429, "{}"};
      return StubServer::Reply{200, StubServer::chat_reply("ok", 1)};
    });
    HttpBackend be(config_for(server));
    CHECK(be.generate(simple_request()).text == "ok");
    CHECK(calls == 3);
  }

  TEST_CASE("gives up after max_attempts; 4xx is not retried") {
    std::atomic<int> calls{0};
    StubServer server([&](const std::string&, const nlohmann::json& body) {
      ++calls;
      return StubServer::Reply{body["max_tokens"] == 1 ? 400 : 500, "{\"error\":\"nope\"}"};
    });
    HttpBackend be(config_for(server));
    CHECK_THROWS_AS(be.generate(simple_request()), BackendError);
    CHECK(calls == 3);
    calls = 0;
    CHECK_THROWS_AS(be.generate(simple_request(1)), BackendError);
    CHECK(calls == 1);
  }

  TEST_CASE("malformed replies and unreachable servers are backend errors") {
    StubServer server([](const std::string&, const nlohmann::json&) { return StubServer::Reply{200, "{\"choices\":[]}"}; });
    HttpBackend be(config_for(server));
    CHECK_THROWS_AS(be.generate(simple_request()), BackendError);

    HttpConfig dead;
    dead.base_url = "http://127.0.0.1:1";
    dead.timeout_s = 1.0;
    dead.max_attempts = 2;
    dead.backoff_initial_s = 0.0;
    HttpBackend unreachable(dead);
    CHECK_THROWS_AS(unreachable.generate(simple_request()), BackendError);
  }

  TEST_CASE("bearer token comes from the environment") {
    StubServer server([](const std::string&, const nlohmann::json&) {
      return StubServer::Reply{200, StubServer::chat_reply("ok", 1)};
    });
    ::setenv("THINKER_TEST_KEY", "sekret", 1);
    {
      HttpBackend be(config_for(server));
      be.generate(simple_request());
    }
    ::unsetenv("THINKER_TEST_KEY");
    {
      HttpBackend be(config_for(server));
      be.generate(simple_request());
    }
    const auto auth = server.auth_headers();
    REQUIRE(auth.size() == 2);
    CHECK(auth[0] == "Bearer sekret");
    CHECK(auth[1] == "");
  }

  TEST_CASE("scoring capability") {
    StubServer server([](const std::string& path, const nlohmann::json& body) {
      if (path != "/v1/completions") return StubServer::Reply{404, "{}"};
      // Two context tokens, then two completion tokens.
      const std::string prompt = body["prompt"];
      const auto split = prompt.size() - 4;
      nlohmann::json lp;
      lp["token_logprobs"] = {nullptr, -1.0, -0.25, -0.5};
      lp["text_offset"] = {0, 3, split, split + 2};
      nlohmann::json j;
      j["choices"] = {{{"text", ""}, {"logprobs", lp}}};
      return StubServer::Reply{200, j.dump()};
    });
    auto cfg = config_for(server);
    HttpBackend plain(cfg);
    CHECK_FALSE(plain.can_score());
    CHECK_THROWS_AS(plain.score_logprob({{"user", "q"}}, "a b"), CapabilityAbsent);

    cfg.scoring = "echo";
    HttpBackend echo(cfg);
    CHECK(echo.can_score());
    CHECK(echo.score_logprob({{"user", "q"}}, "ab c") == -0.75);
    CHECK(echo.score_logprob({{"user", "q"}}, "") == 0.0);
    const auto body = server.bodies().at(0);
    CHECK(body["echo"] == true);
    CHECK(body["prompt"] == "User: q\nAssistant: ab c");
  }

  TEST_CASE("in-flight requests are bounded") {
    std::atomic<int> active{0}, peak{0};
    StubServer server([&](const std::string&, const nlohmann::json&) {
      const int now = ++active;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      --active;
      return StubServer::Reply{200, StubServer::chat_reply("ok", 1)};
    });
    auto cfg = config_for(server);
    cfg.max_in_flight = 2;
    HttpBackend be(cfg);
    rollout::parallel_for(12, 6, [&](std::size_t) { be.generate(simple_request()); });
    CHECK(peak.load() <= 2);
    CHECK(server.bodies().size() == 12);
  }

  TEST_CASE("config validation") {
    HttpConfig c;
    CHECK_NOTHROW(c.validate());
    c.scoring = "logits";
    CHECK_THROWS(c.validate());
    c = {};
    c.max_in_flight = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.base_url.clear();
    CHECK_THROWS(c.validate());
  }
}
