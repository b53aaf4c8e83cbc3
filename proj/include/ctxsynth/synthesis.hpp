#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsynth/corpus.hpp"
#include "ctxsynth/engine.hpp"

namespace ctxsynth {

inline constexpr std::size_t kDefaultTargetWords = 2000;

/// A background context synthesized for one instruction-answer pair. The
/// pair's instruction and answer travel with it so composed datasets can be
/// built from the context file alone.
struct ContextRecord {
  std::string pair_id;
  std::string task;
  std::string instruction;
  std::string answer;
  std::string text;
  std::string engine_id;
  std::string prompt_hash;
  std::size_t word_count = 0;
  std::size_t target_words = 0;
  bool unlabeled = false;  // engine omitted the "Context:" label

  bool operator==(const ContextRecord&) const = default;
};

void to_json(Json& j, const ContextRecord& r);
void from_json(const Json& j, ContextRecord& r);

enum class TemplateMode { generic, summary, multi_hop, single_hop };

std::string_view to_string(TemplateMode mode);
TemplateMode template_mode_from_string(std::string_view name);

/// Task-specific template for a benchmark task name (case-insensitive):
/// summarization tasks -> summary, multi-document QA -> multi_hop,
/// single-document QA -> single_hop. Unknown tasks fall back to generic.
TemplateMode template_mode_for_task(std::string_view task);

struct SynthesizedQA {
  std::string context_id;
  std::string task;
  std::string context;
  std::string question;
  std::string answer;
  TemplateMode template_mode = TemplateMode::generic;
  std::string engine_id;
  std::string prompt_hash;
};

void to_json(Json& j, const SynthesizedQA& qa);

namespace prompts {
extern const std::string_view kContextSystem;
extern const std::string_view kContextUser;  // placeholders <instruction> <answer> <words>
extern const std::string_view kInstructionSystem;
extern const std::string_view kInstructionGenericUser;  // placeholder <context>
extern const std::string_view kInstructionSummaryUser;
extern const std::string_view kInstructionMultiHopUser;
extern const std::string_view kInstructionSingleHopUser;
}  // namespace prompts

ChatRequest build_context_prompt(const InstructionPair& pair, std::size_t target_words = kDefaultTargetWords,
                                 const std::string& engine_id = {});

struct ParsedContext {
  std::string text;
  bool unlabeled = false;
};

/// Strips a leading "Context:" label and trims. Unlabeled text passes through
/// with `unlabeled` set. Throws ParseError when nothing remains.
ParsedContext parse_context_response(std::string_view text);

ChatRequest build_instruction_prompt(std::string_view context, TemplateMode mode,
                                     const std::string& engine_id = {});

struct ParsedQA {
  std::string question;
  std::string answer;
};

/// Splits on the first "Question:" and the first "Answer:" after it.
ParsedQA parse_qa_response(std::string_view text);

struct SynthesisFailure {
  std::string id;
  std::string reason;
};

void to_json(Json& j, const SynthesisFailure& f);

struct ContextSynthesisResult {
  std::vector<ContextRecord> records;  // input order
  std::vector<SynthesisFailure> failures;
  std::size_t unlabeled = 0;
};

/// Synthesizes one context per pair through `engine`. Pairs flagged as not
/// requiring context are reported as failures without a request. Throws when
/// `pairs` is empty or every pair fails.
ContextSynthesisResult synthesize_contexts(std::span<const InstructionPair> pairs, Engine& engine,
                                           std::size_t target_words, std::size_t max_in_flight,
                                           AuditLog* audit = nullptr);

struct InstructionSource {
  std::string id;
  std::string task;
  std::string context;
};

struct InstructionSynthesisResult {
  std::vector<SynthesizedQA> records;
  std::vector<SynthesisFailure> failures;
};

/// Generates one question-answer pair per context. When `mode` is empty the
/// template is chosen per task with template_mode_for_task.
InstructionSynthesisResult synthesize_instructions(std::span<const InstructionSource> sources, Engine& engine,
                                                   std::optional<TemplateMode> mode, std::size_t max_in_flight,
                                                   AuditLog* audit = nullptr);

}  // namespace ctxsynth
