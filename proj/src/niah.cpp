#include "ctxsynth/niah.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

std::string_view to_string(NiahVariant v) {
  switch (v) {
    case NiahVariant::single: return "single";
    case NiahVariant::multi_key: return "multi_key";
    case NiahVariant::multi_query: return "multi_query";
    case NiahVariant::multi_value: return "multi_value";
  }
  return "single";
}

NiahVariant niah_variant_from_string(std::string_view name) {
  for (auto v : kAllNiahVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown NIAH variant \"" + std::string(name) + "\"");
}

// ---------------------------------------------------------------------------
// Needles

NeedleStream::NeedleStream(std::uint64_t seed, const std::unordered_set<std::string>* excluded)
    : rng_(seed), excluded_(excluded) {}

std::string NeedleStream::draw_word() {
  std::uniform_int_distribution<int> length(4, 12);
  std::uniform_int_distribution<int> letter('a', 'z');
  std::string w(static_cast<std::size_t>(length(rng_)), 'a');
  for (auto& c : w) c = static_cast<char>(letter(rng_));
  return w;
}

std::string NeedleStream::draw_uuid() {
  std::array<std::uint8_t, 16> bytes{};
  for (std::size_t i = 0; i < bytes.size(); i += 8) {
    std::uint64_t r = rng_();
    for (std::size_t k = 0; k < 8; ++k) bytes[i + k] = static_cast<std::uint8_t>(r >> (8 * k));
  }
  bytes[6] = static_cast<std::uint8_t>((bytes[6] & 0x0F) | 0x40);
  bytes[8] = static_cast<std::uint8_t>((bytes[8] & 0x3F) | 0x80);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(36);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) out += '-';
    out += kHex[bytes[i] >> 4];
    out += kHex[bytes[i] & 0xF];
  }
  return out;
}

Needle NeedleStream::next() {
  Needle n;
  do {
    n.key_word = draw_word();
  } while (!words_.insert(n.key_word).second);
  do {
    n.value = draw_uuid();
  } while ((excluded_ && excluded_->count(n.value)) || !values_.insert(n.value).second);
  return n;
}

bool is_uuid(std::string_view s) {
  if (s.size() != 36) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool dash = i == 8 || i == 13 || i == 18 || i == 23;
    if (dash != (s[i] == '-')) return false;
    if (!dash && !std::isxdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Insertion

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool ends_sentence(std::string_view text, std::size_t end) {
  // Skip closing quotes and brackets after the terminal mark.
  while (end > 0 && (text[end - 1] == '"' || text[end - 1] == '\'' || text[end - 1] == ')')) --end;
  return end > 0 && (text[end - 1] == '.' || text[end - 1] == '!' || text[end - 1] == '?');
}

/// Offsets where a sentence begins, plus 0 and text.size().
std::vector<std::size_t> sentence_starts(std::string_view text) {
  std::vector<std::size_t> out{0};
  for (std::size_t j = 1; j < text.size(); ++j) {
    if (is_space(text[j]) || !is_space(text[j - 1])) continue;
    std::size_t k = j;
    while (k > 0 && is_space(text[k - 1])) --k;
    if (ends_sentence(text, k)) out.push_back(j);
  }
  if (out.back() != text.size()) out.push_back(text.size());
  return out;
}

}  // namespace

std::string insert_at_depth(std::string_view haystack, std::string_view sentence, double depth) {
  if (!(depth >= 0.0 && depth <= 1.0)) throw Error("needle depth must lie in [0, 1]");
  if (haystack.empty()) return std::string(sentence);
  auto starts = sentence_starts(haystack);
  double target = depth * static_cast<double>(haystack.size());
  std::size_t best = starts.front();
  for (std::size_t s : starts) {
    if (std::abs(static_cast<double>(s) - target) < std::abs(static_cast<double>(best) - target)) best = s;
  }
  std::string out;
  out.reserve(haystack.size() + sentence.size() + 1);
  if (best == haystack.size()) {
    out.append(haystack);
    if (!is_space(haystack.back())) out += ' ';
    out.append(sentence);
  } else {
    out.append(haystack.substr(0, best));
    out.append(sentence);
    out += ' ';
    out.append(haystack.substr(best));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Templates

namespace niah_templates {

namespace {
std::string_view noun(NiahVariant v) { return v == NiahVariant::multi_key ? "uuids" : "numbers"; }

std::string list_keys(std::span<const std::string> keys) {
  if (keys.size() == 1) return keys[0];
  if (keys.size() == 2) return keys[0] + " and " + keys[1];
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i) out += ", ";
    if (i + 1 == keys.size()) out += "and ";
    out += keys[i];
  }
  return out;
}
}  // namespace

std::string preamble(NiahVariant v) {
  std::string n(noun(v));
  return "Some special magic " + n + " are hidden within the following text. Make sure to memorize it. "
         "I will quiz you about the " + n + " afterwards.";
}

std::string needle_sentence(NiahVariant v, std::string_view word, std::string_view value) {
  return "One of the special magic " + std::string(noun(v)) + " for " + std::string(word) + " is: " +
         std::string(value) + ".";
}

std::string question(NiahVariant v, std::span<const std::string> keys) {
  if (keys.empty()) throw Error("NIAH question needs at least one key");
  if (v == NiahVariant::single || v == NiahVariant::multi_key) {
    return "What is the special magic number for " + keys[0] + " mentioned in the provided text?";
  }
  return "What are all the special magic numbers for " + list_keys(keys) + " mentioned in the provided text?";
}

std::string answer_prefix(NiahVariant v, std::span<const std::string> keys) {
  if (keys.empty()) throw Error("NIAH answer prefix needs at least one key");
  if (v == NiahVariant::single || v == NiahVariant::multi_key) {
    return "The special magic number for " + keys[0] + " mentioned in the provided text is";
  }
  return "The special magic numbers for " + list_keys(keys) + " mentioned in the provided text are";
}

}  // namespace niah_templates

// ---------------------------------------------------------------------------
// Samples

void to_json(Json& j, const NiahSample& s) {
  j = Json{{"id", s.id},
           {"variant", to_string(s.variant)},
           {"context", s.context},
           {"question", s.question},
           {"answer_prefix", s.answer_prefix},
           {"gold_values", s.gold_values},
           {"metadata",
            {{"query_keys", s.query_keys},
             {"needle_values", s.needle_values},
             {"needle_depths", s.needle_depths},
             {"target_tokens", s.target_tokens},
             {"actual_tokens", s.actual_tokens},
             {"seed", s.seed}}}};
}

void from_json(const Json& j, NiahSample& s) {
  s.id = j.value("id", "");
  s.variant = niah_variant_from_string(j.value("variant", "single"));
  s.context = j.at("context").get<std::string>();
  s.question = j.value("question", "");
  s.answer_prefix = j.value("answer_prefix", "");
  s.gold_values = j.at("gold_values").get<std::vector<std::string>>();
  const Json meta = j.value("metadata", Json::object());
  s.query_keys = meta.value("query_keys", std::vector<std::string>{});
  s.needle_values = meta.value("needle_values", s.gold_values);
  s.needle_depths = meta.value("needle_depths", std::vector<double>{});
  s.target_tokens = meta.value("target_tokens", std::size_t{0});
  s.actual_tokens = meta.value("actual_tokens", std::size_t{0});
  s.seed = meta.value("seed", std::uint64_t{0});
}

namespace {

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (auto w : split_whitespace(text)) {
    if (!out.empty()) out += ' ';
    out.append(w);
  }
  return out;
}

struct PreparedCorpus {
  std::vector<std::string> documents;  // whitespace-collapsed
  std::vector<std::size_t> tokens;
};

PreparedCorpus prepare(const HaystackCorpus& corpus, const TokenCounter& counter) {
  PreparedCorpus p;
  for (const auto& d : corpus.documents) {
    p.documents.push_back(collapse_whitespace(d.text));
    p.tokens.push_back(counter.count(p.documents.back()));
  }
  return p;
}

struct CutChoice {
  std::size_t below = 0;  // largest candidate whose estimate <= target (or the first)
  std::size_t above = 0;  // next candidate, or `below` if none
  std::size_t best = 0;
  std::size_t estimate = 0;  // estimate at `best`
};

// Picks, among ascending candidate prefix lengths of `text`, the one whose
// estimated context size (fixed + counted prefix) is closest to `target`.
CutChoice closest_cut(std::string_view text, const std::vector<std::size_t>& cuts, std::size_t fixed,
                      std::size_t target, const TokenCounter& counter) {
  auto est = [&](std::size_t cut) { return fixed + counter.count(text.substr(0, cut)); };
  std::size_t lo = 0, hi = cuts.size();
  while (hi - lo > 1) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (est(cuts[mid]) <= target) lo = mid; else hi = mid;
  }
  CutChoice c;
  c.below = c.above = c.best = cuts[lo];
  c.estimate = est(c.below);
  if (lo + 1 < cuts.size()) {
    c.above = cuts[lo + 1];
    std::size_t above_est = est(c.above);
    auto diff = [&](std::size_t e) { return e > target ? e - target : target - e; };
    if (diff(above_est) < diff(c.estimate)) {
      c.best = c.above;
      c.estimate = above_est;
    }
  }
  return c;
}

std::string fmt_id(const std::string& prefix, NiahVariant v, std::size_t i) {
  return fmt::format("{}-{}-{:05d}", prefix, to_string(v), i);
}

NiahSample generate_prepared(const NiahConfig& config, const PreparedCorpus& corpus, const TokenCounter& counter,
                             const std::unordered_set<std::string>* excluded) {
  if (config.n_keys < 1 && config.variant == NiahVariant::multi_key) throw Error("n_keys must be >= 1");
  if (config.n_queries < 1 || config.n_values < 1) throw Error("n_queries and n_values must be >= 1");

  std::mt19937_64 rng(config.seed);
  NeedleStream needles(mix_seed(config.seed, 1), excluded);
  const NiahVariant v = config.variant;

  NiahSample s;
  s.variant = v;
  s.seed = config.seed;
  s.target_tokens = config.target_tokens;

  std::vector<Needle> placed;
  switch (v) {
    case NiahVariant::single: {
      placed.push_back(needles.next());
      s.query_keys = {placed[0].key_word};
      s.gold_values = {placed[0].value};
      break;
    }
    case NiahVariant::multi_key: {
      for (std::size_t i = 0; i <= config.n_keys; ++i) placed.push_back(needles.next());
      std::size_t queried = std::uniform_int_distribution<std::size_t>(0, config.n_keys)(rng);
      s.query_keys = {placed[queried].key_word};
      s.gold_values = {placed[queried].value};
      break;
    }
    case NiahVariant::multi_query: {
      for (std::size_t i = 0; i < config.n_queries; ++i) {
        placed.push_back(needles.next());
        s.query_keys.push_back(placed.back().key_word);
        s.gold_values.push_back(placed.back().value);
      }
      break;
    }
    case NiahVariant::multi_value: {
      Needle first = needles.next();
      s.query_keys = {first.key_word};
      for (std::size_t i = 0; i < config.n_values; ++i) {
        Needle n = i == 0 ? first : needles.next();
        n.key_word = first.key_word;
        placed.push_back(n);
        s.gold_values.push_back(n.value);
      }
      break;
    }
  }

  std::vector<std::string> sentences;
  for (const auto& n : placed) {
    sentences.push_back(niah_templates::needle_sentence(v, n.key_word, n.value));
    s.needle_values.push_back(n.value);
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    double d = config.depths.empty() ? uniform(rng) : config.depths[i % config.depths.size()];
    if (!(d >= 0.0 && d <= 1.0)) throw Error("needle depth must lie in [0, 1]");
    s.needle_depths.push_back(d);
  }

  const std::string preamble = niah_templates::preamble(v) + "\n";
  const std::size_t fixed = counter.count(preamble + join(sentences, " "));

  std::string haystack;
  if (config.target_tokens > fixed) {
    const std::size_t budget = config.target_tokens - fixed;
    const std::size_t want = budget + budget / 10 + 64;
    std::vector<std::size_t> order(corpus.documents.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::string pool;
    std::size_t acc = 0;
    for (std::size_t k = 0; acc < want; ++k) {
      if (k == order.size()) {
        if (!config.allow_repeat || acc == 0) break;
        k = 0;
      }
      if (!pool.empty()) pool += ' ';
      pool += corpus.documents[order[k]];
      acc += corpus.tokens[order[k]];
    }

    auto starts = sentence_starts(pool);
    // Cutting before a sentence start leaves the separating space at the end; cut after it instead.
    std::vector<std::size_t> cuts;
    for (std::size_t st : starts) {
      std::size_t c = st;
      while (c > 0 && is_space(pool[c - 1])) --c;
      if (cuts.empty() || cuts.back() != c) cuts.push_back(c);
    }
    CutChoice choice = closest_cut(pool, cuts, fixed, config.target_tokens, counter);

    const double tolerance = kLengthTolerance * static_cast<double>(config.target_tokens);
    auto miss = [&](std::size_t e) {
      return std::abs(static_cast<double>(e) - static_cast<double>(config.target_tokens));
    };
    if (miss(choice.estimate) > tolerance / 2 && choice.above > choice.below) {
      // A long sentence straddles the target; cut between words inside it.
      std::vector<std::size_t> word_cuts{choice.below};
      for (std::size_t p = choice.below + 1; p < choice.above; ++p) {
        if (is_space(pool[p]) && !is_space(pool[p - 1])) word_cuts.push_back(p);
      }
      word_cuts.push_back(choice.above);
      choice = closest_cut(pool, word_cuts, fixed, config.target_tokens, counter);
    }
    if (miss(choice.estimate) > tolerance) {
      throw Error("haystack corpus too small for " + std::to_string(config.target_tokens) +
                  " tokens (reached " + std::to_string(choice.estimate) + ")");
    }
    std::size_t cut = choice.best;
    haystack = pool.substr(0, cut);
  }

  for (std::size_t i = 0; i < sentences.size(); ++i) {
    haystack = insert_at_depth(haystack, sentences[i], s.needle_depths[i]);
  }
  s.context = preamble + haystack;
  s.question = niah_templates::question(v, s.query_keys);
  s.answer_prefix = niah_templates::answer_prefix(v, s.query_keys);
  s.actual_tokens = counter.count(s.context);
  return s;
}

}  // namespace

NiahSample generate(const NiahConfig& config, const HaystackCorpus& corpus, const TokenCounter& counter,
                    const std::unordered_set<std::string>* excluded_values) {
  return generate_prepared(config, prepare(corpus, counter), counter, excluded_values);
}

PilotLevel pilot_level_from_string(std::string_view name) {
  std::string n = to_lower_ascii(name);
  if (n == "sft2") return PilotLevel::SFT2;
  if (n == "sft3") return PilotLevel::SFT3;
  if (n == "sft4") return PilotLevel::SFT4;
  throw ConfigError("unknown pilot preset \"" + std::string(name) + "\" (expected SFT2, SFT3 or SFT4)");
}

std::string_view to_string(PilotLevel level) {
  switch (level) {
    case PilotLevel::SFT2: return "SFT2";
    case PilotLevel::SFT3: return "SFT3";
    case PilotLevel::SFT4: return "SFT4";
  }
  return "SFT2";
}

std::size_t pilot_target_tokens(PilotLevel level) {
  switch (level) {
    case PilotLevel::SFT2: return 0;
    case PilotLevel::SFT3: return 1000;
    case PilotLevel::SFT4: return 64000;
  }
  return 0;
}

std::vector<NiahSample> gen_pilot_dataset(PilotLevel level, std::size_t per_subtask, const HaystackCorpus& corpus,
                                          const TokenCounter& counter, std::uint64_t seed) {
  if (per_subtask < 1) throw Error("per_subtask must be >= 1");
  const PreparedCorpus prepared = prepare(corpus, counter);
  std::vector<NiahSample> out;
  out.reserve(per_subtask * std::size(kAllNiahVariants));
  for (auto v : kAllNiahVariants) {
    NiahConfig cfg;
    cfg.variant = v;
    cfg.target_tokens = pilot_target_tokens(level);
    cfg.n_keys = kPilotDistractorKeys;
    std::uint64_t variant_seed = mix_seed(seed, static_cast<std::uint64_t>(v) + 1);
    for (std::size_t i = 0; i < per_subtask; ++i) {
      cfg.seed = mix_seed(variant_seed, i);
      NiahSample s = generate_prepared(cfg, prepared, counter, nullptr);
      s.id = fmt_id(to_lower_ascii(to_string(level)), v, i);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<NiahSample> gen_test_suite(const NiahConfig& base, std::span<const std::size_t> lengths,
                                       std::size_t n_per_length, const HaystackCorpus& corpus,
                                       const TokenCounter& counter,
                                       const std::unordered_set<std::string>* excluded_values) {
  if (lengths.empty()) throw Error("test suite needs at least one length");
  const PreparedCorpus prepared = prepare(corpus, counter);
  std::vector<NiahSample> out;
  for (std::size_t length : lengths) {
    NiahConfig cfg = base;
    cfg.target_tokens = length;
    for (std::size_t i = 0; i < n_per_length; ++i) {
      cfg.seed = mix_seed(mix_seed(base.seed, length), i);
      NiahSample s = generate_prepared(cfg, prepared, counter, excluded_values);
      s.id = fmt_id("test-" + std::to_string(length), base.variant, i);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace ctxsynth
