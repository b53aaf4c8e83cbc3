// Python module ctxsynth._core. Records cross the boundary as plain dicts in
// the same shape the command line tool writes to JSONL.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ctxsynth/composition.hpp"
#include "ctxsynth/config.hpp"
#include "ctxsynth/error.hpp"
#include "ctxsynth/niah.hpp"
#include "ctxsynth/packing.hpp"
#include "ctxsynth/pipeline.hpp"
#include "ctxsynth/scoring.hpp"
#include "ctxsynth/synthesis.hpp"
#include "ctxsynth/text.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace ctxsynth;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::handle& obj) {
  return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

template <typename T>
py::list to_py_list(const std::vector<T>& items) {
  py::list out;
  for (const auto& i : items) out.append(to_py(Json(i)));
  return out;
}

template <typename T>
std::vector<T> from_py_list(const py::iterable& items) {
  std::vector<T> out;
  for (const auto& i : items) out.push_back(from_py(i).get<T>());
  return out;
}

// A directory path or a list of document texts.
HaystackCorpus corpus_from(const py::object& haystack) {
  if (haystack.is_none()) return {};
  if (py::isinstance<py::str>(haystack) || py::hasattr(haystack, "__fspath__")) {
    return load_haystack(haystack.cast<fs::path>());
  }
  HaystackCorpus c;
  for (const auto& text : haystack) {
    auto s = text.cast<std::string>();
    c.total_words += word_count(s);
    c.documents.push_back({"doc-" + std::to_string(c.documents.size()), std::move(s)});
  }
  return c;
}

py::dict command_result(const CommandResult& r) {
  py::dict d;
  d["records"] = r.records;
  d["warnings"] = r.warnings;
  py::list outputs;
  for (const auto& p : r.outputs) outputs.append(p.string());
  d["outputs"] = outputs;
  d["summary"] = r.summary;
  return d;
}

PipelineConfig config_from(const py::object& cfg) {
  return cfg.is_none() ? PipelineConfig{} : PipelineConfig::from_json(from_py(cfg));
}

py::tuple request_tuple(const ChatRequest& r) { return py::make_tuple(r.system, r.user); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Context synthesis, NIAH generation, packing and scoring";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<InputError>(m, "InputError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<TransportError>(m, "TransportError", base);

  m.def("version", &tool_version);

  // Corpus
  m.def(
      "load_pairs", [](const fs::path& path) { return to_py_list(load_pairs(path)); }, py::arg("path"));
  m.def(
      "sample_per_task",
      [](const py::iterable& pairs, std::size_t n, std::uint64_t seed) {
        auto in = from_py_list<InstructionPair>(pairs);
        return to_py_list(sample_per_task(in, n, seed).selected);
      },
      py::arg("pairs"), py::arg("n_per_task"), py::arg("seed") = 0);

  // Synthesis prompts
  m.def(
      "build_context_prompt",
      [](const std::string& instruction, const std::string& answer, std::size_t target_words) {
        return request_tuple(build_context_prompt({"", "", instruction, answer, {}, true}, target_words));
      },
      py::arg("instruction"), py::arg("answer"), py::arg("target_words") = kDefaultTargetWords,
      "Returns (system, user) for context synthesis.");
  m.def(
      "build_instruction_prompt",
      [](const std::string& context, const std::string& mode) {
        return request_tuple(build_instruction_prompt(context, template_mode_from_string(mode)));
      },
      py::arg("context"), py::arg("mode") = "generic");
  m.def(
      "parse_context_response",
      [](const std::string& text) {
        auto p = parse_context_response(text);
        return py::make_tuple(p.text, p.unlabeled);
      },
      py::arg("text"), "Returns (context, unlabeled).");
  m.def(
      "parse_qa_response",
      [](const std::string& text) {
        auto p = parse_qa_response(text);
        return py::make_tuple(p.question, p.answer);
      },
      py::arg("text"));
  m.def(
      "template_mode_for_task", [](const std::string& task) { return std::string(to_string(template_mode_for_task(task))); },
      py::arg("task"));

  // NIAH
  m.def(
      "generate_niah",
      [](const std::string& variant, std::size_t target_tokens, const py::object& haystack, std::uint64_t seed,
         std::size_t n_keys, std::size_t n_queries, std::size_t n_values, std::vector<double> depths,
         bool allow_repeat, const std::string& counter) {
        NiahConfig cfg;
        cfg.variant = niah_variant_from_string(variant);
        cfg.target_tokens = target_tokens;
        cfg.seed = seed;
        cfg.n_keys = n_keys;
        cfg.n_queries = n_queries;
        cfg.n_values = n_values;
        cfg.depths = std::move(depths);
        cfg.allow_repeat = allow_repeat;
        return to_py(Json(generate(cfg, corpus_from(haystack), *make_counter(counter))));
      },
      py::arg("variant") = "single", py::arg("target_tokens") = 0, py::arg("haystack") = py::none(),
      py::arg("seed") = 0, py::arg("n_keys") = 32, py::arg("n_queries") = 4, py::arg("n_values") = 4,
      py::arg("depths") = std::vector<double>{}, py::arg("allow_repeat") = false, py::arg("counter") = "whitespace");
  m.def(
      "gen_pilot_dataset",
      [](const std::string& level, std::size_t per_subtask, const py::object& haystack, std::uint64_t seed,
         const std::string& counter) {
        return to_py_list(gen_pilot_dataset(pilot_level_from_string(level), per_subtask, corpus_from(haystack),
                                            *make_counter(counter), seed));
      },
      py::arg("level"), py::arg("per_subtask") = 200, py::arg("haystack") = py::none(), py::arg("seed") = 0,
      py::arg("counter") = "whitespace");

  // Composition
  m.def(
      "compose",
      [](const py::iterable& contexts, std::size_t n, std::uint64_t seed, bool same_task_only) {
        auto records = from_py_list<ContextRecord>(contexts);
        return to_py_list(compose_dataset(records, records, {n, seed, same_task_only}));
      },
      py::arg("contexts"), py::arg("n") = kDefaultConcatenation, py::arg("seed") = 0,
      py::arg("same_task_only") = false);
  m.def(
      "make_context_free", [](const py::dict& s) { return to_py(Json(make_context_free(from_py(s).get<ComposedSample>()))); },
      py::arg("sample"));

  // Packing
  m.def(
      "pack",
      [](const py::iterable& records, std::size_t max_len, const std::string& counter) {
        std::vector<TrainingRecord> in;
        for (const auto& r : records) in.push_back(training_record_from_json(from_py(r), PromptLayout{}));
        auto res = pack(in, max_len, *make_counter(counter));
        loss_weights(res.packs);
        py::dict out;
        out["packs"] = to_py_list(res.packs);
        py::list oversize;
        for (const auto& o : res.oversize) oversize.append(py::make_tuple(o.record_id, o.tokens));
        out["oversize"] = oversize;
        return out;
      },
      py::arg("records"), py::arg("max_len") = kMaxLen64k, py::arg("counter") = "whitespace",
      "Packs training, composed, NIAH or QA records and fills loss weights.");

  // Scoring
  m.def(
      "score_em", [](const std::string& pred, const std::vector<std::string>& gold) { return score_em(pred, gold); },
      py::arg("pred"), py::arg("gold_values"));
  m.def(
      "score_f1", [](const std::string& pred, const std::string& gold) { return score_f1(pred, gold); },
      py::arg("pred"), py::arg("gold"));
  m.def(
      "score_rouge_l", [](const std::string& pred, const std::string& gold) { return score_rouge_l(pred, gold); },
      py::arg("pred"), py::arg("gold"));
  m.def(
      "normalize_answer", [](const std::string& s) { return normalize_answer(s); }, py::arg("text"));
  m.def(
      "gap_report",
      [](const std::map<std::string, double>& free, const std::map<std::string, double>& included, double threshold) {
        auto reports = [](const std::map<std::string, double>& by_task) {
          std::vector<ScoreReport> out;
          for (const auto& [task, mean] : by_task) out.push_back({task, Metric::F1, {}, mean});
          return out;
        };
        return to_py(to_json(gap_report(reports(free), reports(included), threshold)));
      },
      py::arg("context_free"), py::arg("context_included"), py::arg("threshold") = 1.0);

  // Pipeline commands; `config` has the same shape as the JSON config file.
  m.def(
      "synth_context", [](const py::object& cfg) { return command_result(cmd_synthesize_context(config_from(cfg))); },
      py::arg("config"));
  m.def(
      "synth_instruction",
      [](const py::object& cfg) { return command_result(cmd_synthesize_instruction(config_from(cfg))); },
      py::arg("config"));
  m.def(
      "compose_file",
      [](const py::object& cfg, bool context_free) { return command_result(cmd_compose(config_from(cfg), context_free)); },
      py::arg("config"), py::arg("context_free") = false);
  m.def(
      "gen_niah",
      [](const py::object& cfg, const std::vector<fs::path>& exclude_from) {
        return command_result(cmd_gen_niah(config_from(cfg), exclude_from));
      },
      py::arg("config"), py::arg("exclude_from") = std::vector<fs::path>{});
  m.def(
      "pack_file",
      [](const py::object& cfg, const fs::path& input) { return command_result(cmd_pack(config_from(cfg), input)); },
      py::arg("config"), py::arg("input"));
  m.def(
      "score_file",
      [](const py::object& cfg, const fs::path& pred, const fs::path& gold) {
        return command_result(cmd_score(config_from(cfg), pred, gold));
      },
      py::arg("config"), py::arg("predictions"), py::arg("gold"));
  m.def(
      "gap_file",
      [](const py::object& cfg, const fs::path& free, const fs::path& included) {
        return command_result(cmd_gap(config_from(cfg), free, included));
      },
      py::arg("config"), py::arg("context_free"), py::arg("context_included"));
}
