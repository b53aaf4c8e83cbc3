#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <thread>

#include "ctxsynth/error.hpp"
#include "ctxsynth/jsonl.hpp"

namespace ctxsynth {

struct ChatRequest {
  std::string system;
  std::string user;
  // Unset sampling fields are left out of the wire request so the provider default applies.
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<int> max_tokens;
  std::string engine_id;
};

/// Stable hash of (system, user). Sampling fields and engine id are not included.
std::string prompt_hash(const ChatRequest& request);

struct ChatResponse {
  std::string text;
  std::string engine_id;
  std::string prompt_hash;
  std::int64_t latency_ms = 0;
  int attempt = 1;  // 1-based attempt that succeeded
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_before(int attempt) const;
};

RetryPolicy retry_policy_from_json(const Json& j);

/// Runs `call(attempt)` until it succeeds, a non-retryable error is thrown, or
/// attempts run out. TransportError with status 0, 408, 429 or >= 500 is
/// retryable; the last error is rethrown.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& call) -> decltype(call(1));

bool is_retryable_status(int status);

class Engine {
 public:
  virtual ~Engine() = default;
  virtual const std::string& id() const = 0;
  /// Blocking and thread-safe.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct HttpEngineConfig {
  std::string id;
  std::string endpoint;  // full URL of the chat-completions resource
  std::string model;
  std::string credential_env;
  double timeout_s = 120.0;
  double requests_per_second = 0.0;  // 0 disables rate limiting
  RetryPolicy retry;
};

/// Chat-completions over HTTP(S). The credential is read from the environment
/// at construction; a missing variable is a ConfigError.
class HttpEngine final : public Engine {
 public:
  explicit HttpEngine(HttpEngineConfig config);
  const std::string& id() const override { return config_.id; }
  ChatResponse complete(const ChatRequest& request) override;

  /// JSON body sent for `request`.
  Json wire_body(const ChatRequest& request) const;

 private:
  void wait_for_slot();

  HttpEngineConfig config_;
  std::string credential_;
  std::string scheme_host_;
  std::string path_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Extracts the first choice's message content from a chat-completions reply.
std::string parse_chat_completion(const std::string& body);

struct MockRule {
  std::string match;     // substring of the user prompt
  std::string response;  // template; see MockEngine
};

struct MockEngineConfig {
  std::string id = "mock";
  std::uint64_t seed = 0;
  std::vector<MockRule> rules;
  /// Mean length of built-in synthesized contexts, in words.
  std::size_t context_words = 300;
  /// Requests whose user prompt contains any of these fail on every attempt.
  std::vector<std::string> fail_on;
  /// Every request fails this many times before succeeding.
  int transient_failures = 0;
  std::chrono::milliseconds delay{0};
  RetryPolicy retry{.max_attempts = 3, .base_delay = std::chrono::milliseconds(0)};
};

/// Offline engine with deterministic canned responses.
///
/// The first rule whose `match` occurs in the user prompt wins. Rule templates
/// may contain `{user}` (the user prompt), `{hash}` (prompt hash) and
/// `{words:N}` (N seeded filler words). Without a matching rule, context
/// synthesis prompts get a "Context: ..." passage that restates the question
/// and answer, instruction synthesis prompts get a "Question: ... Answer: ..."
/// pair, and anything else is echoed. Output depends only on seed and prompt.
class MockEngine final : public Engine {
 public:
  explicit MockEngine(MockEngineConfig config);
  const std::string& id() const override { return config_.id; }
  ChatResponse complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t max_in_flight_observed() const { return max_in_flight_.load(); }

 private:
  std::string respond(const ChatRequest& request, const std::string& hash) const;

  MockEngineConfig config_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  std::mutex attempts_mutex_;
  std::map<std::string, int> attempts_by_hash_;
};

MockEngineConfig mock_config_from_json(const std::string& id, const Json& j);
HttpEngineConfig http_config_from_json(const std::string& id, const Json& j);

/// Engines by id, built from a config table. Construction validates every
/// entry, so credential problems surface before any request is sent.
class EngineRegistry {
 public:
  EngineRegistry() = default;
  static EngineRegistry from_json(const Json& table);

  void add(std::shared_ptr<Engine> engine);
  Engine& get(const std::string& id) const;
  bool contains(const std::string& id) const { return engines_.count(id) != 0; }
  ChatResponse complete(const ChatRequest& request) const;

 private:
  std::map<std::string, std::shared_ptr<Engine>> engines_;
};

/// Builds only the engine named `id` from the table.
std::shared_ptr<Engine> make_engine(const std::string& id, const Json& table);

struct BatchItem {
  std::optional<ChatResponse> response;
  std::string error;
  int error_status = 0;
  bool ok() const { return response.has_value(); }
};

/// Completes `requests` with at most `max_in_flight` outstanding calls.
/// result[i] always belongs to requests[i]; failures are reported in their slot.
std::vector<BatchItem> complete_batch(Engine& engine, std::span<const ChatRequest> requests,
                                      std::size_t max_in_flight);

/// Line-delimited audit trail of engine calls.
class AuditLog {
 public:
  void record(const ChatRequest& request, const BatchItem& item);
  const std::vector<Json>& entries() const { return entries_; }

 private:
  std::mutex mutex_;
  std::vector<Json> entries_;
};

// ---------------------------------------------------------------------------

template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& call) -> decltype(call(1)) {
  for (int attempt = 1;; ++attempt) {
    try {
      return call(attempt);
    } catch (const TransportError& e) {
      if (attempt >= policy.max_attempts || !is_retryable_status(e.status())) throw;
    }
    std::this_thread::sleep_for(policy.delay_before(attempt + 1));
  }
}

}  // namespace ctxsynth
