#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include "ctxsynth/engine.hpp"
#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

using namespace ctxsynth;

namespace {

ChatRequest req(const std::string& user, const std::string& system = "sys") {
  ChatRequest r;
  r.system = system;
  r.user = user;
  return r;
}

// Local chat-completions endpoint. Fails the first `failures` calls with `fail_status`.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mutex;
  std::vector<Json> bodies;
  std::vector<std::string> auth;
  int failures = 0;
  int fail_status = 503;
  std::string reply = R"({"choices":[{"message":{"role":"assistant","content":"Context: served"}}]})";

  FakeServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& rq, httplib::Response& rs) {
      std::lock_guard lock(mutex);
      bodies.push_back(Json::parse(rq.body));
      auth.push_back(rq.get_header_value("Authorization"));
      if (failures > 0) {
        --failures;
        rs.status = fail_status;
        rs.set_content("busy", "text/plain");
        return;
      }
      rs.set_content(reply, "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

HttpEngineConfig http_config(const FakeServer& s) {
  HttpEngineConfig c;
  c.id = "remote";
  c.endpoint = s.endpoint();
  c.model = "test-model";
  c.credential_env = "CTXSYNTH_TEST_KEY";
  c.timeout_s = 5;
  c.retry.base_delay = std::chrono::milliseconds(1);
  return c;
}

}  // namespace

TEST_CASE("mock engine rules and defaults") {
  MockEngineConfig echo;
  echo.rules.push_back({"", "Context: X"});
  MockEngine m(echo);
  CHECK(m.complete(req("anything")).text == "Context: X");
  CHECK(m.complete(req("anything")).latency_ms == 0);

  MockEngineConfig c;
  c.rules.push_back({"alpha", "got {user}"});
  MockEngine rules(c);
  CHECK(rules.complete(req("alpha beta")).text == "got alpha beta");
  CHECK(rules.complete(req("plain")).text == "plain");

  MockEngineConfig fill;
  fill.rules.push_back({"", "{words:7}"});
  MockEngine filler(fill);
  auto a = filler.complete(req("x")).text;
  CHECK(word_count(a) == 7);
  CHECK(filler.complete(req("x")).text == a);

  CHECK_THROWS_AS(m.complete(req("  ")), Error);
}

TEST_CASE("prompt hash") {
  auto a = req("u", "s");
  auto b = req("u", "s");
  b.temperature = 0.3;
  b.engine_id = "other";
  CHECK(prompt_hash(a) == prompt_hash(b));
  CHECK(prompt_hash(req("su", "")) != prompt_hash(req("u", "s")));
}

TEST_CASE("registry") {
  auto reg = EngineRegistry::from_json(Json{{"m", {{"type", "mock"}}}});
  CHECK(reg.contains("m"));
  CHECK_THROWS_AS(reg.get("nope"), ConfigError);
  auto r = req("hello");
  r.engine_id = "m";
  CHECK(reg.complete(r).engine_id == "m");
  CHECK_THROWS_AS(make_engine("m", Json{{"m", {{"type", "mock"}, {"api_key", "sk-123"}}}}), ConfigError);
  CHECK_THROWS_AS(make_engine("m", Json{{"m", {{"type", "grpc"}}}}), ConfigError);
}

TEST_CASE("retry policy") {
  RetryPolicy p;
  CHECK(p.delay_before(2) == std::chrono::milliseconds(500));
  CHECK(p.delay_before(3) == std::chrono::milliseconds(1000));
  CHECK(p.delay_before(30) == std::chrono::milliseconds(30000));
  CHECK(is_retryable_status(0));
  CHECK(is_retryable_status(429));
  CHECK(is_retryable_status(503));
  CHECK_FALSE(is_retryable_status(400));
  CHECK_FALSE(is_retryable_status(401));

  RetryPolicy fast{.max_attempts = 3, .base_delay = std::chrono::milliseconds(0)};
  int calls = 0;
  CHECK(with_retry(fast, [&](int attempt) {
          ++calls;
          if (attempt < 3) throw TransportError("x", 500);
          return attempt;
        }) == 3);
  calls = 0;
  CHECK_THROWS_AS(with_retry(fast, [&](int) -> int {
                    ++calls;
                    throw TransportError("bad request", 400);
                  }),
                  TransportError);
  CHECK(calls == 1);
}

TEST_CASE("complete_batch") {
  MockEngineConfig c;
  c.delay = std::chrono::milliseconds(5);
  MockEngine m(c);

  std::vector<ChatRequest> five;
  for (int i = 0; i < 5; ++i) five.push_back(req("r" + std::to_string(i)));
  auto serial = complete_batch(m, five, 1);
  REQUIRE(serial.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(serial[i].response->text == "r" + std::to_string(i));
  CHECK(m.max_in_flight_observed() == 1);

  std::vector<ChatRequest> many;
  for (int i = 0; i < 40; ++i) many.push_back(req("q" + std::to_string(i)));
  auto par = complete_batch(m, many, 3);
  for (int i = 0; i < 40; ++i) CHECK(par[i].response->text == "q" + std::to_string(i));
  CHECK(m.max_in_flight_observed() <= 3);

  CHECK(complete_batch(m, std::span<const ChatRequest>{}, 4).empty());
  CHECK_THROWS_AS(complete_batch(m, five, 0), Error);

  MockEngineConfig faulty;
  faulty.fail_on = {"r2"};
  MockEngine f(faulty);
  auto res = complete_batch(f, five, 2);
  int ok = 0;
  for (const auto& item : res) ok += item.ok();
  CHECK(ok == 4);
  CHECK_FALSE(res[2].ok());
  CHECK(res[2].error_status == 503);
  CHECK(f.calls() == 4 + 3);  // three attempts on the failing request

  MockEngineConfig flaky;
  flaky.transient_failures = 2;
  MockEngine t(flaky);
  auto one = t.complete(req("x"));
  CHECK(one.attempt == 3);

  AuditLog log;
  log.record(five[2], res[2]);
  log.record(five[0], res[0]);
  REQUIRE(log.entries().size() == 2);
  CHECK(log.entries()[0]["ok"] == false);
  CHECK(log.entries()[1]["ok"] == true);
}

TEST_CASE("http engine") {
  FakeServer server;
  ::unsetenv("CTXSYNTH_TEST_KEY");
  CHECK_THROWS_AS(HttpEngine(http_config(server)), ConfigError);
  CHECK_THROWS_AS(make_engine("remote", Json{{"remote", {{"endpoint", server.endpoint()}, {"model", "m"},
                                                         {"credential_env", "CTXSYNTH_TEST_KEY"}}}}),
                  ConfigError);
  CHECK(server.bodies.empty());

  ::setenv("CTXSYNTH_TEST_KEY", "secret-token", 1);
  HttpEngine engine(http_config(server));

  SUBCASE("wire format") {
    auto r = req("user text", "system text");
    r.max_tokens = 64;
    auto resp = engine.complete(r);
    CHECK(resp.text == "Context: served");
    CHECK(resp.engine_id == "remote");
    CHECK(resp.prompt_hash == prompt_hash(r));
    REQUIRE(server.bodies.size() == 1);
    const Json& b = server.bodies[0];
    CHECK(b["model"] == "test-model");
    CHECK(b["messages"][0]["role"] == "system");
    CHECK(b["messages"][0]["content"] == "system text");
    CHECK(b["messages"][1]["role"] == "user");
    CHECK(b["messages"][1]["content"] == "user text");
    CHECK(b["max_tokens"] == 64);
    CHECK_FALSE(b.contains("temperature"));
    CHECK_FALSE(b.contains("top_p"));
    CHECK(server.auth[0] == "Bearer secret-token");
  }
  SUBCASE("retries server errors") {
    server.failures = 2;
    auto resp = engine.complete(req("again"));
    CHECK(resp.attempt == 3);
    CHECK(server.bodies.size() == 3);
  }
  SUBCASE("does not retry client errors") {
    server.failures = 1;
    server.fail_status = 400;
    try {
      engine.complete(req("bad"));
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.status() == 400);
    }
    CHECK(server.bodies.size() == 1);
  }
  SUBCASE("malformed reply") {
    server.reply = R"({"choices":[]})";
    CHECK_THROWS_AS(engine.complete(req("x")), TransportError);
  }
  SUBCASE("unreachable endpoint") {
    auto c = http_config(server);
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.retry.max_attempts = 2;
    c.timeout_s = 1;
    HttpEngine dead(c);
    try {
      dead.complete(req("x"));
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.status() == 0);
    }
  }
  CHECK(parse_chat_completion(R"({"choices":[{"message":{"content":"hi"}}]})") == "hi");
  ::unsetenv("CTXSYNTH_TEST_KEY");
}
