#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxsynth/jsonl.hpp"
#include "ctxsynth/packing.hpp"
#include "ctxsynth/synthesis.hpp"
#include "ctxsynth/tokens.hpp"

namespace ctxsynth {

inline constexpr std::string_view kBlockSeparator = "\n\n";
inline constexpr std::size_t kDefaultConcatenation = 10;

/// Final training sample: one relevant context plus n-1 distractor contexts
/// synthesized for other pairs, in shuffled order.
struct ComposedSample {
  std::string pair_id;
  std::string task;
  std::string context_text;
  std::string instruction;
  std::string answer;
  std::size_t n_contexts = 0;
  std::size_t relevant_index = 0;
  std::vector<std::string> component_ids;
  bool context_free = false;
  std::uint64_t seed = 0;

  bool operator==(const ComposedSample&) const = default;
};

void to_json(Json& j, const ComposedSample& s);
void from_json(const Json& j, ComposedSample& s);

struct ComposeOptions {
  std::size_t n = kDefaultConcatenation;
  std::uint64_t seed = 0;
  /// Restrict distractors to contexts of the same task.
  bool same_task_only = false;
};

/// Joins `record` with n-1 distractors drawn without replacement from pool
/// entries of other pairs, then shuffles block order. Throws when the pool
/// holds fewer than n-1 eligible pairs.
ComposedSample concatenate(const ContextRecord& record, std::span<const ContextRecord> pool, std::size_t n,
                           std::uint64_t seed, bool same_task_only = false);

/// Composes every record against `pool`. Each sample's seed is derived from
/// the dataset seed and its pair id, so a sample does not depend on its
/// position in the file.
std::vector<ComposedSample> compose_dataset(std::span<const ContextRecord> records,
                                            std::span<const ContextRecord> pool, const ComposeOptions& options);

ComposedSample make_context_free(const ComposedSample& sample);

struct PromptLayout {
  std::string context_prefix;
  std::string separator{kBlockSeparator};
  std::string instruction_prefix;

  bool operator==(const PromptLayout&) const = default;
};

PromptLayout prompt_layout_from_json(const Json& j);
Json to_json(const PromptLayout& layout);

/// Context-included: context_prefix + context + separator + instruction_prefix + instruction.
/// Context-free: instruction_prefix + instruction.
TrainingRecord assemble_prompt(const ComposedSample& sample, const PromptLayout& layout = {});

struct LengthDistribution {
  std::vector<std::size_t> counts;
  double min = 0, p25 = 0, median = 0, p75 = 0, max = 0, mean = 0;
};

Json to_json(const LengthDistribution& d, bool include_counts = false);

/// Quantiles interpolate linearly between order statistics. Throws on empty input.
LengthDistribution summarize_lengths(std::vector<std::size_t> counts);

/// Distribution of prompt lengths (context plus instruction).
LengthDistribution length_stats(std::span<const TrainingRecord> records, const TokenCounter& counter);

}  // namespace ctxsynth
