#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ctxsynth/corpus.hpp"
#include "ctxsynth/jsonl.hpp"
#include "ctxsynth/tokens.hpp"

namespace ctxsynth {

enum class NiahVariant { single, multi_key, multi_query, multi_value };

inline constexpr NiahVariant kAllNiahVariants[] = {NiahVariant::single, NiahVariant::multi_key,
                                                   NiahVariant::multi_query, NiahVariant::multi_value};

std::string_view to_string(NiahVariant v);
NiahVariant niah_variant_from_string(std::string_view name);

struct Needle {
  std::string key_word;
  std::string value;  // RFC 4122 version-4 UUID, lowercase
};

/// Seeded source of needles. Never repeats a word or value it has produced,
/// and skips any value found in `excluded` (e.g. needles used for training).
class NeedleStream {
 public:
  explicit NeedleStream(std::uint64_t seed, const std::unordered_set<std::string>* excluded = nullptr);
  Needle next();

 private:
  std::string draw_word();
  std::string draw_uuid();

  std::mt19937_64 rng_;
  const std::unordered_set<std::string>* excluded_;
  std::unordered_set<std::string> words_;
  std::unordered_set<std::string> values_;
};

bool is_uuid(std::string_view s);

/// Inserts `sentence` at the sentence start nearest to depth * haystack size
/// (depth 0: first sentence, depth 1: last). A single space separates it from
/// the neighbouring text; the haystack is otherwise unchanged.
std::string insert_at_depth(std::string_view haystack, std::string_view sentence, double depth);

namespace niah_templates {
std::string preamble(NiahVariant v);
std::string needle_sentence(NiahVariant v, std::string_view word, std::string_view value);
/// `keys` lists the queried key words (several only for multi_query).
std::string question(NiahVariant v, std::span<const std::string> keys);
std::string answer_prefix(NiahVariant v, std::span<const std::string> keys);
}  // namespace niah_templates

struct NiahConfig {
  NiahVariant variant = NiahVariant::single;
  /// Length of the whole context under the configured counter. Values at or
  /// below the needle-only size produce a context without haystack.
  std::size_t target_tokens = 0;
  std::size_t n_keys = 32;  // multi_key distractor needles
  std::size_t n_queries = 4;
  std::size_t n_values = 4;
  /// Fixed needle depths in [0,1], reused cyclically; empty = uniform random per needle.
  std::vector<double> depths;
  std::uint64_t seed = 0;
  /// Cycle through the corpus again when one pass is too short.
  bool allow_repeat = false;
};

struct NiahSample {
  std::string id;
  NiahVariant variant = NiahVariant::single;
  std::string context;
  std::string question;
  std::string answer_prefix;
  std::vector<std::string> gold_values;
  std::vector<std::string> query_keys;
  /// Every value placed in the context, distractors included.
  std::vector<std::string> needle_values;
  std::vector<double> needle_depths;
  std::size_t target_tokens = 0;
  std::size_t actual_tokens = 0;
  std::uint64_t seed = 0;
};

void to_json(Json& j, const NiahSample& s);
void from_json(const Json& j, NiahSample& s);

/// Relative tolerance on actual vs target tokens for haystack-backed samples.
inline constexpr double kLengthTolerance = 0.02;

NiahSample generate(const NiahConfig& config, const HaystackCorpus& corpus, const TokenCounter& counter,
                    const std::unordered_set<std::string>* excluded_values = nullptr);

enum class PilotLevel { SFT2, SFT3, SFT4 };

PilotLevel pilot_level_from_string(std::string_view name);
std::string_view to_string(PilotLevel level);
/// Context length of the level's haystack: 0 (needle only), 1000, 64000.
std::size_t pilot_target_tokens(PilotLevel level);
inline constexpr std::size_t kPilotDistractorKeys = 3;

/// per_subtask samples for each of the four variants, variant-major order.
std::vector<NiahSample> gen_pilot_dataset(PilotLevel level, std::size_t per_subtask, const HaystackCorpus& corpus,
                                          const TokenCounter& counter, std::uint64_t seed);

/// n_per_length samples per requested length for one variant. Needle values
/// listed in `excluded_values` are never reused.
std::vector<NiahSample> gen_test_suite(const NiahConfig& base, std::span<const std::size_t> lengths,
                                       std::size_t n_per_length, const HaystackCorpus& corpus,
                                       const TokenCounter& counter,
                                       const std::unordered_set<std::string>* excluded_values = nullptr);

}  // namespace ctxsynth
