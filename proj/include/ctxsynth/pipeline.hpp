#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctxsynth/config.hpp"
#include "ctxsynth/packing.hpp"

namespace ctxsynth {

/// Outcome of one pipeline stage. Errors are thrown, not returned.
struct CommandResult {
  std::size_t records = 0;
  std::size_t warnings = 0;
  std::vector<std::filesystem::path> outputs;
  std::string summary;
};

std::string tool_version();

/// Provenance record written as the first line of every output file.
Json make_header(const std::string& command, const Json& settings, std::uint64_t seed,
                 std::span<const std::filesystem::path> inputs);

/// Converts one record of any dataset we emit (training, composed, NIAH,
/// synthesized QA) into a training record.
TrainingRecord training_record_from_json(const Json& j, const PromptLayout& layout);

std::vector<TrainingRecord> load_training_records(const std::filesystem::path& path, const PromptLayout& layout);

// Each command reads the inputs named in `config.paths` (or passed
// explicitly) and writes fixed file names under config.paths.output_dir.

/// contexts.jsonl, context_failures.jsonl, audit.jsonl
CommandResult cmd_synthesize_context(const PipelineConfig& config);
/// instructions.jsonl, instruction_failures.jsonl, audit.jsonl. Reads
/// paths.contexts when set, otherwise the source_context of paths.pairs.
CommandResult cmd_synthesize_instruction(const PipelineConfig& config);
/// composed.jsonl, plus composed_context_free.jsonl when requested.
CommandResult cmd_compose(const PipelineConfig& config, bool emit_context_free = false);
/// niah.jsonl. Needle values found in `exclude_from` files are not reused.
CommandResult cmd_gen_niah(const PipelineConfig& config,
                           std::span<const std::filesystem::path> exclude_from = {});
/// packed.jsonl, oversize.jsonl
CommandResult cmd_pack(const PipelineConfig& config, const std::filesystem::path& input);
/// scores.jsonl, scores.txt
CommandResult cmd_score(const PipelineConfig& config, const std::filesystem::path& predictions,
                        const std::filesystem::path& gold);
/// gap.jsonl, gap.txt
CommandResult cmd_gap(const PipelineConfig& config, const std::filesystem::path& context_free,
                      const std::filesystem::path& context_included);
/// stats.jsonl, stats.txt
CommandResult cmd_stats(const PipelineConfig& config, std::span<const std::filesystem::path> inputs);

}  // namespace ctxsynth
