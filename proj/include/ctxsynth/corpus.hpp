#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxsynth/jsonl.hpp"

namespace ctxsynth {

/// A source instruction-answer pair. `source_context` is the original
/// human-written context, kept only for instruction-synthesis baselines.
struct InstructionPair {
  std::string id;
  std::string task;
  std::string instruction;
  std::string answer;
  std::optional<std::string> source_context;
  bool requires_context = true;

  bool operator==(const InstructionPair&) const = default;
};

void to_json(Json& j, const InstructionPair& p);
void from_json(const Json& j, InstructionPair& p);

/// Maps InstructionPair fields onto the keys used by a particular dataset.
struct FieldMapping {
  std::string id = "id";
  std::string task = "task";
  std::string instruction = "instruction";
  std::string answer = "answer";
  std::string source_context = "source_context";
  std::string requires_context = "requires_context";
  /// Used when a record has no task field; empty means the field is required.
  std::string default_task;
};

FieldMapping field_mapping_from_json(const Json& j);

/// Builds a pair from one record. A list-valued answer contributes its first entry.
InstructionPair pair_from_record(const Json& record, const FieldMapping& fields);

std::vector<InstructionPair> load_pairs(const std::filesystem::path& path,
                                        const FieldMapping& fields = {});

struct TaskShortfall {
  std::string task;
  std::size_t requested = 0;
  std::size_t available = 0;
};

struct SampleResult {
  std::vector<InstructionPair> selected;
  std::vector<TaskShortfall> shortfalls;
  /// Pairs skipped because requires_context is false.
  std::size_t rejected_context_free = 0;
};

/// Picks min(n_per_task, available) pairs per task without replacement.
/// Candidates are ordered by id before the seeded shuffle, so the choice does
/// not depend on input order. Output is grouped by task name, ids ascending.
SampleResult sample_per_task(std::span<const InstructionPair> pairs, std::size_t n_per_task,
                             std::uint64_t seed);

struct HaystackDocument {
  std::string id;
  std::string text;
};

struct HaystackCorpus {
  std::vector<HaystackDocument> documents;
  std::size_t total_words = 0;
};

/// One document per regular file in `dir`, ordered by file name.
HaystackCorpus load_haystack(const std::filesystem::path& dir);

}  // namespace ctxsynth
