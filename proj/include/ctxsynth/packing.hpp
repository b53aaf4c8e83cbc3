#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxsynth/jsonl.hpp"
#include "ctxsynth/tokens.hpp"

namespace ctxsynth {

/// Model-ready record: the prompt is conditioning text, only answer tokens
/// are trained on. Pre-counted token fields, when present, take precedence
/// over the counter (that is how real tokenizer counts enter).
struct TrainingRecord {
  std::string id;
  std::string prompt;
  std::string answer;
  std::optional<std::size_t> prompt_tokens;
  std::optional<std::size_t> answer_tokens;
};

void to_json(Json& j, const TrainingRecord& r);
void from_json(const Json& j, TrainingRecord& r);

struct PackedSegment {
  std::string record_id;
  std::size_t offset = 0;  // token offset inside the packed sequence
  std::size_t prompt_tokens = 0;
  std::size_t answer_tokens = 0;
  /// Weight of each answer token; prompt tokens always weigh 0.
  double loss_weight = 0.0;

  std::size_t tokens() const { return prompt_tokens + answer_tokens; }
};

struct PackedSequence {
  std::vector<PackedSegment> segments;
  std::size_t total_tokens = 0;
  std::size_t max_len = 0;
};

void to_json(Json& j, const PackedSequence& p);

struct OversizeRecord {
  std::string record_id;
  std::size_t tokens = 0;
};

struct PackResult {
  std::vector<PackedSequence> packs;
  std::vector<OversizeRecord> oversize;
};

inline constexpr std::size_t kMaxLen32k = 32768;
inline constexpr std::size_t kMaxLen64k = 65536;

/// First-fit-decreasing by total tokens (ties: id ascending). Records longer
/// than max_len go to the oversize list untouched. Throws if every record is
/// oversize or max_len is 0.
PackResult pack(std::span<const TrainingRecord> records, std::size_t max_len, const TokenCounter& counter);

/// Fills loss weights so each answer token of record i weighs 1 / (K * N_i),
/// K = number of records across all packs, N_i = answer tokens of record i.
/// Every record then contributes 1/K and the weights sum to 1.
/// Throws naming the record when N_i = 0.
void loss_weights(std::vector<PackedSequence>& packs);

}  // namespace ctxsynth
