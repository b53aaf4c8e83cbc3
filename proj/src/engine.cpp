#include "ctxsynth/engine.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

using Clock = std::chrono::steady_clock;

std::string prompt_hash(const ChatRequest& request) {
  std::string material;
  material += std::to_string(request.system.size());
  material += ':';
  material += request.system;
  material += std::to_string(request.user.size());
  material += ':';
  material += request.user;
  return sha256_hex(material);
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds(0);
  double ms = static_cast<double>(base_delay.count());
  for (int i = 2; i < attempt; ++i) ms *= multiplier;
  ms = std::min(ms, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

RetryPolicy retry_policy_from_json(const Json& j) {
  RetryPolicy p;
  if (!j.is_object()) return p;
  p.max_attempts = j.value("max_attempts", p.max_attempts);
  p.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", p.base_delay.count()));
  p.multiplier = j.value("multiplier", p.multiplier);
  p.max_delay = std::chrono::milliseconds(j.value("max_delay_ms", p.max_delay.count()));
  if (p.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  return p;
}

bool is_retryable_status(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

// ---------------------------------------------------------------------------
// HTTP

HttpEngine::HttpEngine(HttpEngineConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ConfigError("engine \"" + config_.id + "\": endpoint not set");
  if (config_.credential_env.empty()) {
    throw ConfigError("engine \"" + config_.id + "\": credential_env not set");
  }
  const char* value = std::getenv(config_.credential_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw ConfigError("engine \"" + config_.id + "\": environment variable " + config_.credential_env +
                      " is not set");
  }
  credential_ = value;

  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url_re)) {
    throw ConfigError("engine \"" + config_.id + "\": malformed endpoint URL " + config_.endpoint);
  }
  scheme_host_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
}

Json HttpEngine::wire_body(const ChatRequest& request) const {
  Json messages = Json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", request.user}});
  Json body{{"model", config_.model}, {"messages", messages}};
  if (request.temperature) body["temperature"] = *request.temperature;
  if (request.top_p) body["top_p"] = *request.top_p;
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  return body;
}

void HttpEngine::wait_for_slot() {
  if (config_.requests_per_second <= 0.0) return;
  auto interval = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(1.0 / config_.requests_per_second));
  Clock::time_point slot;
  {
    std::lock_guard lock(rate_mutex_);
    slot = std::max(Clock::now(), next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string parse_chat_completion(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("response body is not JSON", 200);
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception&) {
    throw TransportError("response has no choices[0].message.content", 200);
  }
}

ChatResponse HttpEngine::complete(const ChatRequest& request) {
  if (trim(request.user).empty()) throw Error("chat request has an empty user message");
  const std::string body = wire_body(request).dump();
  const std::string hash = prompt_hash(request);

  return with_retry(config_.retry, [&](int attempt) {
    wait_for_slot();
    httplib::Client client(scheme_host_);
    auto timeout = std::chrono::duration<double>(config_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_bearer_token_auth(credential_);

    auto start = Clock::now();
    auto res = client.Post(path_, body, "application/json");
    if (!res) throw TransportError("transport error: " + httplib::to_string(res.error()), 0);
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                           res->status);
    }
    ChatResponse out;
    out.text = parse_chat_completion(res->body);
    out.engine_id = config_.id;
    out.prompt_hash = hash;
    out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    out.attempt = attempt;
    return out;
  });
}

// ---------------------------------------------------------------------------
// Mock

namespace {

constexpr const char* kFillerVocabulary[] = {
    "the",      "city",     "river",     "council",  "year",      "report",   "family",    "school",
    "market",   "winter",   "garden",    "museum",   "letter",    "village",  "project",   "harbor",
    "history",  "science",  "teacher",   "doctor",   "engineer",  "painter",  "station",   "journey",
    "record",   "season",   "festival",  "library",  "mountain",  "forest",   "company",   "program",
    "evidence", "decision", "committee", "election", "building",  "railway",  "language",  "music",
    "quietly",  "slowly",   "finally",   "later",    "often",     "rarely",   "together",  "again",
    "old",      "new",      "small",     "large",    "northern",  "southern", "local",     "public",
    "early",    "recent",   "famous",    "careful",  "difficult", "simple",   "important", "private",
    "built",    "opened",   "described", "visited",  "wrote",     "found",    "moved",     "studied",
    "became",   "returned", "measured",  "explained", "remembered", "organized", "started", "closed",
    "and",      "with",     "from",      "near",     "after",     "before",   "during",    "without",
    "of",       "in",       "on",        "for",      "by",        "about",    "under",     "between"};

std::string filler_words(std::mt19937_64& rng, std::size_t n) {
  constexpr std::size_t vocab = std::size(kFillerVocabulary);
  std::string out;
  std::size_t sentence_left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::string w = kFillerVocabulary[rng() % vocab];
    bool start = sentence_left == 0;
    if (start) {
      sentence_left = 6 + rng() % 12;
      w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    }
    --sentence_left;
    if (!out.empty()) out += ' ';
    out += w;
    if (sentence_left == 0 || i + 1 == n) {
      out += '.';
      sentence_left = 0;
    }
  }
  return out;
}

// Extracts "Question: ...\nAnswer: ..." fields from a context synthesis prompt.
std::pair<std::string, std::string> question_and_answer(const std::string& user) {
  auto q = user.find("Question: ");
  auto a = user.find("\nAnswer: ", q == std::string::npos ? 0 : q);
  if (q == std::string::npos || a == std::string::npos) return {};
  auto end = user.find("\n\n", a + 9);
  return {user.substr(q + 10, a - (q + 10)),
          user.substr(a + 9, end == std::string::npos ? std::string::npos : end - (a + 9))};
}

}  // namespace

MockEngine::MockEngine(MockEngineConfig config) : config_(std::move(config)) {}

std::string MockEngine::respond(const ChatRequest& request, const std::string& hash) const {
  std::mt19937_64 rng(mix_seed(config_.seed, stable_hash64(hash)));
  auto expand = [&](const std::string& tmpl) {
    static const std::regex words_re(R"(\{words:(\d+)\})");
    std::string out;
    auto begin = std::sregex_iterator(tmpl.begin(), tmpl.end(), words_re);
    std::size_t pos = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      out += tmpl.substr(pos, static_cast<std::size_t>(it->position()) - pos);
      out += filler_words(rng, std::stoul((*it)[1]));
      pos = static_cast<std::size_t>(it->position() + it->length());
    }
    out += tmpl.substr(pos);
    out = replace_all(out, "{hash}", hash);
    return replace_all(out, "{user}", request.user);
  };

  for (const auto& rule : config_.rules) {
    if (request.user.find(rule.match) != std::string::npos) return expand(rule.response);
  }

  if (request.system.find("infer the missing context") != std::string::npos) {
    auto [question, answer] = question_and_answer(request.user);
    std::size_t mean = std::max<std::size_t>(config_.context_words, 4);
    std::size_t total = mean / 2 + rng() % (mean + 1);
    std::size_t before = total / 2;
    std::string text = "Context: " + filler_words(rng, before);
    if (!question.empty()) text += " The question was: " + question + " The answer is: " + answer + ".";
    text += " " + filler_words(rng, total - before);
    return text;
  }
  if (request.system.find("create a question") != std::string::npos) {
    auto body = request.user;
    auto start = body.find("Context:\n");
    body = start == std::string::npos ? body : body.substr(start + 9);
    body = body.substr(0, body.find("\n\nThe above is"));
    auto words = split_whitespace(body);
    std::string answer;
    for (std::size_t i = 0; i < std::min<std::size_t>(words.size(), 12); ++i) {
      if (i) answer += ' ';
      answer += words[i];
    }
    return "Question: What does passage " + hash.substr(0, 8) + " open with?\nAnswer: " + answer;
  }
  return request.user;
}

ChatResponse MockEngine::complete(const ChatRequest& request) {
  if (trim(request.user).empty()) throw Error("chat request has an empty user message");
  const std::string hash = prompt_hash(request);
  return with_retry(config_.retry, [&](int attempt) {
    ++calls_;
    std::size_t now = ++in_flight_;
    std::size_t prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    struct Leave {
      std::atomic<std::size_t>& counter;
      ~Leave() { --counter; }
    } leave{in_flight_};

    if (config_.delay.count() > 0) std::this_thread::sleep_for(config_.delay);
    for (const auto& f : config_.fail_on) {
      if (request.user.find(f) != std::string::npos) throw TransportError("injected failure", 503);
    }
    if (config_.transient_failures > 0) {
      std::lock_guard lock(attempts_mutex_);
      if (attempts_by_hash_[hash]++ < config_.transient_failures) {
        throw TransportError("injected transient failure", 503);
      }
    }
    ChatResponse out;
    out.text = respond(request, hash);
    out.engine_id = config_.id;
    out.prompt_hash = hash;
    out.latency_ms = 0;
    out.attempt = attempt;
    return out;
  });
}

// ---------------------------------------------------------------------------
// Registry

MockEngineConfig mock_config_from_json(const std::string& id, const Json& j) {
  MockEngineConfig c;
  c.id = id;
  c.seed = j.value("seed", std::uint64_t{0});
  c.context_words = j.value("context_words", c.context_words);
  c.transient_failures = j.value("transient_failures", 0);
  c.delay = std::chrono::milliseconds(j.value("delay_ms", 0));
  if (j.contains("rules")) {
    for (const auto& r : j.at("rules")) {
      c.rules.push_back({r.at("match").get<std::string>(), r.at("response").get<std::string>()});
    }
  }
  if (j.contains("fail_on")) c.fail_on = j.at("fail_on").get<std::vector<std::string>>();
  if (j.contains("retry")) c.retry = retry_policy_from_json(j.at("retry"));
  return c;
}

HttpEngineConfig http_config_from_json(const std::string& id, const Json& j) {
  HttpEngineConfig c;
  c.id = id;
  c.endpoint = j.value("endpoint", "");
  c.model = j.value("model", "");
  c.credential_env = j.value("credential_env", "");
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.requests_per_second = j.value("requests_per_second", 0.0);
  if (j.contains("retry")) c.retry = retry_policy_from_json(j.at("retry"));
  return c;
}

std::shared_ptr<Engine> make_engine(const std::string& id, const Json& table) {
  if (!table.is_object() || !table.contains(id)) {
    throw ConfigError("engine \"" + id + "\" is not configured");
  }
  const Json& entry = table.at(id);
  for (const char* forbidden : {"api_key", "credential", "token", "key"}) {
    if (entry.contains(forbidden)) {
      throw ConfigError("engine \"" + id + "\": credentials must come from an environment variable, not \"" +
                        forbidden + "\"");
    }
  }
  std::string type = entry.value("type", "http");
  if (type == "mock") return std::make_shared<MockEngine>(mock_config_from_json(id, entry));
  if (type == "http") return std::make_shared<HttpEngine>(http_config_from_json(id, entry));
  throw ConfigError("engine \"" + id + "\": unknown type \"" + type + "\"");
}

EngineRegistry EngineRegistry::from_json(const Json& table) {
  EngineRegistry reg;
  if (table.is_null()) return reg;
  if (!table.is_object()) throw ConfigError("engines must be an object keyed by engine id");
  for (const auto& [id, _] : table.items()) reg.add(make_engine(id, table));
  return reg;
}

void EngineRegistry::add(std::shared_ptr<Engine> engine) {
  auto id = engine->id();
  engines_[id] = std::move(engine);
}

Engine& EngineRegistry::get(const std::string& id) const {
  auto it = engines_.find(id);
  if (it == engines_.end()) throw ConfigError("engine \"" + id + "\" is not configured");
  return *it->second;
}

ChatResponse EngineRegistry::complete(const ChatRequest& request) const {
  return get(request.engine_id).complete(request);
}

// ---------------------------------------------------------------------------
// Batching

std::vector<BatchItem> complete_batch(Engine& engine, std::span<const ChatRequest> requests,
                                      std::size_t max_in_flight) {
  if (max_in_flight < 1) throw Error("max_in_flight must be >= 1");
  std::vector<BatchItem> results(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        results[i].response = engine.complete(requests[i]);
      } catch (const TransportError& e) {
        results[i].error = e.what();
        results[i].error_status = e.status();
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  std::size_t n_workers = std::min(max_in_flight, requests.size());
  if (n_workers <= 1) {
    worker();
    return results;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

void AuditLog::record(const ChatRequest& request, const BatchItem& item) {
  Json e{{"engine_id", request.engine_id}, {"prompt_hash", prompt_hash(request)}};
  if (item.ok()) {
    e["engine_id"] = item.response->engine_id;
    e["latency_ms"] = item.response->latency_ms;
    e["attempt"] = item.response->attempt;
    e["ok"] = true;
  } else {
    e["ok"] = false;
    e["error"] = item.error;
    e["status"] = item.error_status;
  }
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(e));
}

}  // namespace ctxsynth
