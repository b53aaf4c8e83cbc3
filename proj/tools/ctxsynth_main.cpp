// ctxsynth: long-context instruction data synthesis, NIAH generation,
// packing and scoring from the command line.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <optional>

#include "ctxsynth/error.hpp"
#include "ctxsynth/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ctxsynth;

namespace {

template <typename T>
void override_with(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void report(const CommandResult& res) {
  if (!res.summary.empty()) std::cout << res.summary << (res.summary.back() == '\n' ? "" : "\n");
  for (const auto& p : res.outputs) std::cout << "wrote " << p.string() << "\n";
  if (res.warnings) std::cerr << "warning: " << res.warnings << " warning(s); see reports above\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize, compose, pack and score long-context instruction data"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out_dir;
  app.add_option("-c,--config", config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("-o,--out-dir", out_dir, "Output directory");

  // synth-context / synth-instruction
  std::optional<std::string> pairs, contexts, engine, mode;
  std::optional<std::size_t> target_words, n_per_task, max_in_flight;
  std::optional<std::uint64_t> syn_seed;

  auto* synth_ctx = app.add_subcommand("synth-context", "Synthesize background contexts for instruction-answer pairs");
  synth_ctx->add_option("--pairs", pairs, "Line-delimited instruction-answer pairs");
  synth_ctx->add_option("--engine", engine, "Engine id from the config's engine table");
  synth_ctx->add_option("--target-words", target_words, "Requested context length in words (default 2000)");
  synth_ctx->add_option("--n-per-task", n_per_task, "Sample this many pairs per task before synthesis");
  synth_ctx->add_option("--seed", syn_seed, "Sampling seed");
  synth_ctx->add_option("--max-in-flight", max_in_flight, "Concurrent engine requests");

  auto* synth_ins = app.add_subcommand("synth-instruction", "Synthesize question-answer pairs from contexts (baseline)");
  synth_ins->add_option("--contexts", contexts, "Context records (otherwise source_context of --pairs)");
  synth_ins->add_option("--pairs", pairs, "Pairs carrying source_context");
  synth_ins->add_option("--engine", engine, "Engine id");
  synth_ins->add_option("--mode", mode, "generic | summary | multi_hop | single_hop | task");
  synth_ins->add_option("--max-in-flight", max_in_flight, "Concurrent engine requests");

  // compose
  std::optional<std::size_t> n;
  std::optional<std::string> n_preset, context_prefix, separator, instruction_prefix;
  std::optional<std::uint64_t> compose_seed;
  bool same_task_only = false, context_free = false;
  auto* compose = app.add_subcommand("compose", "Concatenate each context with n-1 distractor contexts");
  compose->add_option("--contexts", contexts, "Context records from synth-context");
  compose->add_option("--n", n, "Contexts per sample (1 relevant + n-1 distractors)");
  compose->add_option("--preset", n_preset, "n1 | n5 | n10");
  compose->add_option("--seed", compose_seed, "Composition seed");
  compose->add_flag("--same-task-only", same_task_only, "Draw distractors from the same task only");
  compose->add_flag("--context-free", context_free, "Also write the context-free variant");
  compose->add_option("--context-prefix", context_prefix, "Text before the context block");
  compose->add_option("--separator", separator, "Text between context and instruction");
  compose->add_option("--instruction-prefix", instruction_prefix, "Text before the instruction");

  // gen-niah
  std::optional<std::string> haystack, niah_preset, variant, niah_counter;
  std::optional<std::size_t> per_subtask, target_tokens, n_keys, n_queries, n_values, count, n_per_length;
  std::optional<std::uint64_t> niah_seed;
  std::vector<double> depths;
  std::vector<std::size_t> lengths;
  std::vector<std::string> exclude_from;
  bool allow_repeat = false;
  auto* gen_niah = app.add_subcommand("gen-niah", "Generate needle-in-a-haystack samples");
  gen_niah->add_option("--haystack", haystack, "Directory of plain-text haystack documents");
  gen_niah->add_option("--preset", niah_preset, "SFT2 | SFT3 | SFT4 pilot dataset");
  gen_niah->add_option("--per-subtask", per_subtask, "Samples per variant for presets (default 200)");
  gen_niah->add_option("--variant", variant, "single | multi_key | multi_query | multi_value");
  gen_niah->add_option("--target-tokens", target_tokens, "Context length under the counter");
  gen_niah->add_option("--n-keys", n_keys, "Distractor needles for multi_key (default 32)");
  gen_niah->add_option("--n-queries", n_queries, "Queried needles for multi_query (default 4)");
  gen_niah->add_option("--n-values", n_values, "Values for multi_value (default 4)");
  gen_niah->add_option("--depths", depths, "Fixed needle depths in [0,1]");
  gen_niah->add_option("--seed", niah_seed, "Generation seed");
  gen_niah->add_option("--count", count, "Samples for a custom configuration");
  gen_niah->add_option("--lengths", lengths, "Test suite lengths");
  gen_niah->add_option("--n-per-length", n_per_length, "Test samples per length");
  gen_niah->add_option("--counter", niah_counter, "whitespace | chars4");
  gen_niah->add_option("--exclude-from", exclude_from, "NIAH files whose needle values must not be reused");
  gen_niah->add_flag("--allow-repeat", allow_repeat, "Cycle through the corpus when one pass is too short");

  // pack
  std::string pack_input;
  std::optional<std::size_t> max_len;
  std::optional<std::string> len_preset, pack_counter;
  auto* pack_cmd = app.add_subcommand("pack", "Pack records into max-length sequences with loss weights");
  pack_cmd->add_option("--input", pack_input, "Training, composed, NIAH or QA records")->required();
  pack_cmd->add_option("--max-len", max_len, "Maximum tokens per packed sequence");
  pack_cmd->add_option("--preset", len_preset, "32k | 64k");
  pack_cmd->add_option("--counter", pack_counter, "whitespace | chars4");
  pack_cmd->add_option("--context-prefix", context_prefix, "Text before the context block");
  pack_cmd->add_option("--separator", separator, "Text between context and instruction");
  pack_cmd->add_option("--instruction-prefix", instruction_prefix, "Text before the instruction");

  // score
  std::string pred_path, gold_path;
  std::optional<std::string> metric, task;
  auto* score = app.add_subcommand("score", "Score predictions with EM, F1 or Rouge-L");
  score->add_option("--pred", pred_path, "Predictions: {sample_id, text}")->required();
  score->add_option("--gold", gold_path, "Gold records")->required();
  score->add_option("--metric", metric, "em | f1 | rouge_l");
  score->add_option("--task", task, "Task name for every gold record");

  // gap
  std::string free_path, included_path;
  std::optional<double> threshold;
  auto* gap = app.add_subcommand("gap", "Compare context-free and context-included scores");
  gap->add_option("--free", free_path, "Scores after context-free tuning")->required();
  gap->add_option("--included", included_path, "Scores after context-included tuning")->required();
  gap->add_option("--threshold", threshold, "Gaps at or below this are flagged (default 1.0)");

  // stats
  std::vector<std::string> stats_inputs;
  auto* stats = app.add_subcommand("stats", "Prompt length distribution of datasets");
  stats->add_option("--input", stats_inputs, "Datasets to measure")->required();
  stats->add_option("--counter", pack_counter, "whitespace | chars4");
  stats->add_option("--context-prefix", context_prefix, "Text before the context block");
  stats->add_option("--separator", separator, "Text between context and instruction");
  stats->add_option("--instruction-prefix", instruction_prefix, "Text before the instruction");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);

    override_with(out_dir, cfg.paths.output_dir);
    override_with(pairs, cfg.paths.pairs);
    override_with(contexts, cfg.paths.contexts);
    override_with(haystack, cfg.paths.haystack);
    override_with(engine, cfg.synthesis.engine);
    override_with(mode, cfg.synthesis.mode);
    override_with(target_words, cfg.synthesis.target_words);
    override_with(max_in_flight, cfg.synthesis.max_in_flight);
    override_with(syn_seed, cfg.synthesis.seed);
    if (n_per_task) cfg.synthesis.n_per_task = *n_per_task;

    override_with(n, cfg.composition.n);
    if (n_preset) cfg.composition.n = concatenation_preset(*n_preset);
    override_with(compose_seed, cfg.composition.seed);
    if (same_task_only) cfg.composition.same_task_only = true;
    override_with(context_prefix, cfg.composition.layout.context_prefix);
    override_with(separator, cfg.composition.layout.separator);
    override_with(instruction_prefix, cfg.composition.layout.instruction_prefix);

    override_with(niah_preset, cfg.niah.preset);
    override_with(per_subtask, cfg.niah.per_subtask);
    if (variant) cfg.niah.config.variant = niah_variant_from_string(*variant);
    override_with(target_tokens, cfg.niah.config.target_tokens);
    override_with(n_keys, cfg.niah.config.n_keys);
    override_with(n_queries, cfg.niah.config.n_queries);
    override_with(n_values, cfg.niah.config.n_values);
    if (!depths.empty()) cfg.niah.config.depths = depths;
    override_with(niah_seed, cfg.niah.config.seed);
    override_with(count, cfg.niah.count);
    if (!lengths.empty()) cfg.niah.lengths = lengths;
    override_with(n_per_length, cfg.niah.n_per_length);
    override_with(niah_counter, cfg.niah.counter);
    if (allow_repeat) cfg.niah.config.allow_repeat = true;

    override_with(max_len, cfg.packing.max_len);
    if (len_preset) cfg.packing.max_len = max_len_preset(*len_preset);
    override_with(pack_counter, cfg.packing.counter);

    override_with(metric, cfg.scoring.metric);
    override_with(task, cfg.scoring.task);
    override_with(threshold, cfg.scoring.gap_threshold);

    CommandResult res;
    if (*synth_ctx) {
      res = cmd_synthesize_context(cfg);
    } else if (*synth_ins) {
      res = cmd_synthesize_instruction(cfg);
    } else if (*compose) {
      res = cmd_compose(cfg, context_free);
    } else if (*gen_niah) {
      std::vector<fs::path> excl(exclude_from.begin(), exclude_from.end());
      res = cmd_gen_niah(cfg, excl);
    } else if (*pack_cmd) {
      res = cmd_pack(cfg, pack_input);
    } else if (*score) {
      res = cmd_score(cfg, pred_path, gold_path);
    } else if (*gap) {
      res = cmd_gap(cfg, free_path, included_path);
    } else if (*stats) {
      std::vector<fs::path> in(stats_inputs.begin(), stats_inputs.end());
      res = cmd_stats(cfg, in);
    }
    report(res);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
