#include "ctxsynth/pipeline.hpp"

#include <fmt/format.h>

#include <map>
#include <unordered_set>

#include "ctxsynth/engine.hpp"
#include "ctxsynth/error.hpp"
#include "ctxsynth/scoring.hpp"
#include "ctxsynth/synthesis.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

namespace fs = std::filesystem;

std::string tool_version() { return CTXSYNTH_VERSION; }

Json make_header(const std::string& command, const Json& settings, std::uint64_t seed,
                 std::span<const fs::path> inputs) {
  Json in = Json::array();
  for (const auto& p : inputs) {
    if (fs::is_regular_file(p)) {
      in.push_back({{"path", p.string()}, {"sha256", sha256_hex(read_text_file(p), 64)}});
    } else {
      in.push_back({{"path", p.string()}});
    }
  }
  return Json{{"tool", "ctxsynth"},
              {"version", tool_version()},
              {"command", command},
              {"config_hash", sha256_hex(settings.dump())},
              {"seed", seed},
              {"settings", settings},
              {"inputs", in}};
}

namespace {

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " file not found: " + path);
}

template <typename T>
std::vector<Json> to_json_list(const std::vector<T>& items) {
  std::vector<Json> out;
  out.reserve(items.size());
  for (const auto& i : items) out.push_back(Json(i));
  return out;
}

fs::path out_path(const PipelineConfig& config, const char* name) { return fs::path(config.paths.output_dir) / name; }

std::vector<ContextRecord> load_context_records(const fs::path& path) {
  std::vector<ContextRecord> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(line.value.get<ContextRecord>());
    } catch (const Json::exception& e) {
      throw InputError(std::string("invalid context record: ") + e.what(), path.string(), line.line);
    }
  }
  return out;
}

}  // namespace

TrainingRecord training_record_from_json(const Json& j, const PromptLayout& layout) {
  if (j.contains("prompt") && j.contains("answer")) return j.get<TrainingRecord>();
  if (j.contains("instruction") && (j.contains("context_text") || j.contains("context_free"))) {
    return assemble_prompt(j.get<ComposedSample>(), layout);
  }
  if (j.contains("gold_values") && j.contains("context")) {
    NiahSample s = j.get<NiahSample>();
    TrainingRecord r;
    r.id = s.id;
    r.prompt = s.context + "\n" + s.question;
    r.answer = s.answer_prefix + " " + join(s.gold_values, ", ") + ".";
    return r;
  }
  if (j.contains("question") && j.contains("context") && j.contains("answer")) {
    ComposedSample s;
    s.pair_id = j.value("context_id", j.value("id", ""));
    s.context_text = j.at("context").get<std::string>();
    s.instruction = j.at("question").get<std::string>();
    s.answer = j.at("answer").get<std::string>();
    return assemble_prompt(s, layout);
  }
  throw InputError("record is not a training, composed, NIAH or QA record");
}

std::vector<TrainingRecord> load_training_records(const fs::path& path, const PromptLayout& layout) {
  std::vector<TrainingRecord> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.push_back(training_record_from_json(line.value, layout));
    } catch (const InputError& e) {
      throw InputError(e.what(), path.string(), line.line);
    } catch (const Json::exception& e) {
      throw InputError(e.what(), path.string(), line.line);
    }
  }
  return out;
}

CommandResult cmd_synthesize_context(const PipelineConfig& config) {
  const auto& syn = config.synthesis;
  // Building the engine first surfaces credential problems before any work.
  auto engine = make_engine(syn.engine, config.engines);
  require_file(config.paths.pairs, "pairs");

  auto pairs = load_pairs(config.paths.pairs, config.fields);
  CommandResult res;
  if (syn.n_per_task) {
    auto sampled = sample_per_task(pairs, *syn.n_per_task, syn.seed);
    res.warnings += sampled.shortfalls.size();
    pairs = std::move(sampled.selected);
  }

  AuditLog audit;
  auto out = synthesize_contexts(pairs, *engine, syn.target_words, syn.max_in_flight, &audit);

  Json settings{{"engine", syn.engine},
                {"engine_config", config.engines.at(syn.engine)},
                {"target_words", syn.target_words},
                {"n_per_task", syn.n_per_task ? Json(*syn.n_per_task) : Json(nullptr)}};
  std::vector<fs::path> inputs{config.paths.pairs};
  Json header = make_header("synth-context", settings, syn.seed, inputs);

  res.outputs = {out_path(config, "contexts.jsonl"), out_path(config, "context_failures.jsonl"),
                 out_path(config, "audit.jsonl")};
  write_jsonl_atomic(res.outputs[0], header, to_json_list(out.records));
  write_jsonl_atomic(res.outputs[1], header, to_json_list(out.failures));
  write_jsonl_atomic(res.outputs[2], header, audit.entries());
  res.records = out.records.size();
  res.warnings += out.failures.size() + out.unlabeled;
  res.summary = fmt::format("{} contexts, {} failures, {} unlabeled responses", out.records.size(),
                            out.failures.size(), out.unlabeled);
  return res;
}

CommandResult cmd_synthesize_instruction(const PipelineConfig& config) {
  const auto& syn = config.synthesis;
  auto engine = make_engine(syn.engine, config.engines);
  std::optional<TemplateMode> mode;
  if (syn.mode != "task") mode = template_mode_from_string(syn.mode);

  std::vector<InstructionSource> sources;
  fs::path input;
  if (!config.paths.contexts.empty()) {
    require_file(config.paths.contexts, "contexts");
    input = config.paths.contexts;
    for (auto& r : load_context_records(input)) sources.push_back({r.pair_id, r.task, std::move(r.text)});
  } else {
    require_file(config.paths.pairs, "pairs");
    input = config.paths.pairs;
    for (auto& p : load_pairs(input, config.fields)) {
      if (!p.source_context || trim(*p.source_context).empty()) {
        throw InputError("pair \"" + p.id + "\" has no source context", input.string());
      }
      sources.push_back({p.id, p.task, std::move(*p.source_context)});
    }
  }

  AuditLog audit;
  auto out = synthesize_instructions(sources, *engine, mode, syn.max_in_flight, &audit);

  Json settings{{"engine", syn.engine}, {"engine_config", config.engines.at(syn.engine)}, {"mode", syn.mode}};
  std::vector<fs::path> inputs{input};
  Json header = make_header("synth-instruction", settings, syn.seed, inputs);
  CommandResult res;
  res.outputs = {out_path(config, "instructions.jsonl"), out_path(config, "instruction_failures.jsonl"),
                 out_path(config, "audit.jsonl")};
  write_jsonl_atomic(res.outputs[0], header, to_json_list(out.records));
  write_jsonl_atomic(res.outputs[1], header, to_json_list(out.failures));
  write_jsonl_atomic(res.outputs[2], header, audit.entries());
  res.records = out.records.size();
  res.warnings = out.failures.size();
  res.summary = fmt::format("{} question-answer pairs, {} failures", out.records.size(), out.failures.size());
  return res;
}

CommandResult cmd_compose(const PipelineConfig& config, bool emit_context_free) {
  const auto& comp = config.composition;
  require_file(config.paths.contexts, "contexts");
  auto records = load_context_records(config.paths.contexts);
  if (records.empty()) throw InputError("no context records", config.paths.contexts);

  ComposeOptions opts{comp.n, comp.seed, comp.same_task_only};
  auto samples = compose_dataset(records, records, opts);

  Json settings{{"n", comp.n}, {"same_task_only", comp.same_task_only}, {"layout", to_json(comp.layout)}};
  std::vector<fs::path> inputs{config.paths.contexts};
  CommandResult res;
  res.outputs.push_back(out_path(config, "composed.jsonl"));
  write_jsonl_atomic(res.outputs.back(), make_header("compose", settings, comp.seed, inputs), to_json_list(samples));
  if (emit_context_free) {
    std::vector<ComposedSample> free;
    free.reserve(samples.size());
    for (const auto& s : samples) free.push_back(make_context_free(s));
    Json free_settings = settings;
    free_settings["context_free"] = true;
    res.outputs.push_back(out_path(config, "composed_context_free.jsonl"));
    write_jsonl_atomic(res.outputs.back(), make_header("compose", free_settings, comp.seed, inputs),
                       to_json_list(free));
  }
  res.records = samples.size();
  res.summary = fmt::format("{} composed samples (n={})", samples.size(), comp.n);
  return res;
}

CommandResult cmd_gen_niah(const PipelineConfig& config, std::span<const fs::path> exclude_from) {
  const auto& nc = config.niah;
  auto counter = make_counter(nc.counter);

  std::optional<PilotLevel> level;
  if (!nc.preset.empty()) level = pilot_level_from_string(nc.preset);

  HaystackCorpus corpus;
  std::vector<fs::path> inputs;
  bool needs_haystack = level ? *level != PilotLevel::SFT2 : true;
  if (!level && nc.lengths.empty() && nc.config.target_tokens == 0) needs_haystack = false;
  if (needs_haystack || !config.paths.haystack.empty()) {
    if (config.paths.haystack.empty()) throw ConfigError("haystack directory is not set");
    if (!fs::is_directory(config.paths.haystack)) {
      throw ConfigError("haystack directory not found: " + config.paths.haystack);
    }
    corpus = load_haystack(config.paths.haystack);
    inputs.push_back(config.paths.haystack);
  }

  std::unordered_set<std::string> excluded;
  for (const auto& f : exclude_from) {
    require_file(f.string(), "exclusion");
    inputs.push_back(f);
    for (const auto& line : read_jsonl(f)) {
      auto s = line.value.get<NiahSample>();
      excluded.insert(s.needle_values.begin(), s.needle_values.end());
    }
  }

  std::vector<NiahSample> samples;
  Json settings{{"counter", nc.counter}};
  std::uint64_t seed = nc.config.seed;
  if (level) {
    samples = gen_pilot_dataset(*level, nc.per_subtask, corpus, *counter, seed);
    settings["preset"] = to_string(*level);
    settings["per_subtask"] = nc.per_subtask;
  } else {
    settings["variant"] = to_string(nc.config.variant);
    settings["n_keys"] = nc.config.n_keys;
    settings["n_queries"] = nc.config.n_queries;
    settings["n_values"] = nc.config.n_values;
    settings["depths"] = nc.config.depths;
    settings["allow_repeat"] = nc.config.allow_repeat;
    if (!nc.lengths.empty()) {
      samples = gen_test_suite(nc.config, nc.lengths, nc.n_per_length, corpus, *counter, &excluded);
      settings["lengths"] = nc.lengths;
      settings["n_per_length"] = nc.n_per_length;
    } else {
      NiahConfig cfg = nc.config;
      for (std::size_t i = 0; i < nc.count; ++i) {
        cfg.seed = mix_seed(seed, i);
        NiahSample s = generate(cfg, corpus, *counter, &excluded);
        s.id = fmt::format("niah-{}-{:05d}", to_string(cfg.variant), i);
        samples.push_back(std::move(s));
      }
      settings["target_tokens"] = nc.config.target_tokens;
      settings["count"] = nc.count;
    }
  }

  CommandResult res;
  res.outputs.push_back(out_path(config, "niah.jsonl"));
  write_jsonl_atomic(res.outputs.back(), make_header("gen-niah", settings, seed, inputs), to_json_list(samples));
  res.records = samples.size();
  res.summary = fmt::format("{} NIAH samples", samples.size());
  return res;
}

CommandResult cmd_pack(const PipelineConfig& config, const fs::path& input) {
  require_file(input.string(), "pack input");
  auto counter = make_counter(config.packing.counter);
  auto records = load_training_records(input, config.composition.layout);
  auto packed = pack(records, config.packing.max_len, *counter);
  loss_weights(packed.packs);

  Json settings{{"max_len", config.packing.max_len},
                {"counter", config.packing.counter},
                {"layout", to_json(config.composition.layout)}};
  std::vector<fs::path> inputs{input};
  Json header = make_header("pack", settings, 0, inputs);
  std::vector<Json> oversize;
  for (const auto& o : packed.oversize) oversize.push_back({{"record_id", o.record_id}, {"tokens", o.tokens}});

  CommandResult res;
  res.outputs = {out_path(config, "packed.jsonl"), out_path(config, "oversize.jsonl")};
  write_jsonl_atomic(res.outputs[0], header, to_json_list(packed.packs));
  write_jsonl_atomic(res.outputs[1], header, oversize);
  res.records = packed.packs.size();
  res.warnings = packed.oversize.size();
  res.summary = fmt::format("{} records in {} packs, {} oversize", records.size() - packed.oversize.size(),
                            packed.packs.size(), packed.oversize.size());
  return res;
}

CommandResult cmd_score(const PipelineConfig& config, const fs::path& predictions, const fs::path& gold) {
  require_file(predictions.string(), "predictions");
  require_file(gold.string(), "gold");
  Metric metric = metric_from_string(config.scoring.metric);

  std::map<std::string, std::string> preds;
  for (const auto& line : read_jsonl(predictions)) {
    const Json& j = line.value;
    std::string id = j.contains("sample_id") ? j.at("sample_id").get<std::string>() : j.value("id", "");
    std::string text;
    bool found = false;
    for (const char* key : {"text", "prediction", "pred", "output"}) {
      if (j.contains(key)) {
        text = j.at(key).get<std::string>();
        found = true;
        break;
      }
    }
    if (id.empty() || !found) {
      throw InputError("prediction needs sample_id and text", predictions.string(), line.line);
    }
    if (!preds.emplace(id, std::move(text)).second) {
      throw InputError("duplicate prediction for \"" + id + "\"", predictions.string(), line.line);
    }
  }
  std::vector<GoldRecord> golds;
  for (const auto& line : read_jsonl(gold)) {
    try {
      golds.push_back(gold_from_json(line.value, config.scoring.task.empty() ? "default" : config.scoring.task));
    } catch (const InputError& e) {
      throw InputError(e.what(), gold.string(), line.line);
    }
    if (!config.scoring.task.empty()) golds.back().task = config.scoring.task;
  }

  auto outcome = score_dataset(preds, golds, metric);
  Json settings{{"metric", to_string(metric)}, {"task", config.scoring.task}};
  std::vector<fs::path> inputs{predictions, gold};
  std::vector<Json> rows;
  for (const auto& r : outcome.reports) rows.push_back(to_json(r));

  CommandResult res;
  res.outputs = {out_path(config, "scores.jsonl"), out_path(config, "scores.txt")};
  write_jsonl_atomic(res.outputs[0], make_header("score", settings, 0, inputs), rows);
  write_text_atomic(res.outputs[1], render_score_table(outcome.reports));
  res.records = outcome.reports.size();
  res.warnings = outcome.missing_predictions.size();
  res.summary = render_score_table(outcome.reports);
  return res;
}

CommandResult cmd_gap(const PipelineConfig& config, const fs::path& context_free, const fs::path& context_included) {
  require_file(context_free.string(), "context-free scores");
  require_file(context_included.string(), "context-included scores");
  auto load = [](const fs::path& p) {
    std::vector<ScoreReport> out;
    for (const auto& line : read_jsonl(p)) {
      try {
        out.push_back(score_report_from_json(line.value));
      } catch (const std::exception& e) {
        throw InputError(std::string("invalid score report: ") + e.what(), p.string(), line.line);
      }
    }
    return out;
  };
  auto report = gap_report(load(context_free), load(context_included), config.scoring.gap_threshold);

  Json settings{{"threshold", config.scoring.gap_threshold}};
  std::vector<fs::path> inputs{context_free, context_included};
  const Json table = to_json(report);
  std::vector<Json> rows(table.at("rows").begin(), table.at("rows").end());

  CommandResult res;
  res.outputs = {out_path(config, "gap.jsonl"), out_path(config, "gap.txt")};
  write_jsonl_atomic(res.outputs[0], make_header("gap", settings, 0, inputs), rows);
  write_text_atomic(res.outputs[1], render_gap_table(report));
  res.records = report.rows.size();
  for (const auto& r : report.rows) res.warnings += r.low_coherence ? 1 : 0;
  res.summary = render_gap_table(report);
  return res;
}

CommandResult cmd_stats(const PipelineConfig& config, std::span<const fs::path> inputs) {
  if (inputs.empty()) throw ConfigError("stats needs at least one input file");
  auto counter = make_counter(config.packing.counter);
  std::vector<Json> rows;
  std::string table = fmt::format("{:<32} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}\n", "input", "n", "min", "p25",
                                  "median", "p75", "max", "mean");
  for (const auto& in : inputs) {
    require_file(in.string(), "stats input");
    auto records = load_training_records(in, config.composition.layout);
    auto dist = length_stats(records, *counter);
    Json row = to_json(dist);
    row["input"] = in.string();
    rows.push_back(row);
    table += fmt::format("{:<32} {:>6} {:>8.0f} {:>8.1f} {:>8.1f} {:>8.1f} {:>8.0f} {:>10.1f}\n",
                         in.filename().string(), dist.counts.size(), dist.min, dist.p25, dist.median, dist.p75,
                         dist.max, dist.mean);
  }
  Json settings{{"counter", config.packing.counter}, {"layout", to_json(config.composition.layout)}};
  CommandResult res;
  res.outputs = {out_path(config, "stats.jsonl"), out_path(config, "stats.txt")};
  write_jsonl_atomic(res.outputs[0], make_header("stats", settings, 0, inputs), rows);
  write_text_atomic(res.outputs[1], table);
  res.records = rows.size();
  res.summary = table;
  return res;
}

}  // namespace ctxsynth
