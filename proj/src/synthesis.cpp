#include "ctxsynth/synthesis.hpp"

#include <algorithm>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

namespace prompts {

const std::string_view kContextSystem =
    "Please infer the missing context. Always start with \"Context:\" and do not provide any explanation.";

const std::string_view kContextUser =
    "Context: [MISSING]\n"
    "Question: <instruction>\n"
    "Answer: <answer>\n"
    "\n"
    "The above is a question-answer pair based on a context which is missing. Write the missing context to "
    "provide relevant background information that leads to both the question and the answer, ensuring that "
    "any necessary numerical or factual details are included. The context also should include relevant "
    "details about the character, their environment, aspirations, challenges, and relationships. It should "
    "be sufficiently detailed to reach approximately <words> words.";

const std::string_view kInstructionSystem =
    "Please create a question and its answer based on the background text given to you. Always begin the "
    "question with \"Question:\" and then begin the answer with \"Answer:\". Do not provide any explanation.";

#define CTXSYNTH_QA_USER(ask)                                                                        \
  "Context:\n"                                                                                       \
  "<context>\n"                                                                                      \
  "\n"                                                                                               \
  "The above is a piece of text providing some background information. Write a question " ask        \
  " and then provide the corresponding answer. One must be able to infer the answer from the context " \
  "information."

const std::string_view kInstructionGenericUser = CTXSYNTH_QA_USER("based on this context");
const std::string_view kInstructionSummaryUser = CTXSYNTH_QA_USER("seeking a summary across the entire context");
const std::string_view kInstructionMultiHopUser =
    CTXSYNTH_QA_USER("requiring multi-hop reasoning across the entire context");
const std::string_view kInstructionSingleHopUser = CTXSYNTH_QA_USER("seeking information from the context");

#undef CTXSYNTH_QA_USER

}  // namespace prompts

void to_json(Json& j, const ContextRecord& r) {
  j = Json{{"pair_id", r.pair_id},         {"task", r.task},
           {"instruction", r.instruction}, {"answer", r.answer},
           {"text", r.text},               {"engine_id", r.engine_id},
           {"prompt_hash", r.prompt_hash}, {"word_count", r.word_count},
           {"target_words", r.target_words}};
  if (r.unlabeled) j["unlabeled"] = true;
}

void from_json(const Json& j, ContextRecord& r) {
  r.pair_id = j.at("pair_id").get<std::string>();
  r.task = j.value("task", "");
  r.instruction = j.value("instruction", "");
  r.answer = j.value("answer", "");
  r.text = j.at("text").get<std::string>();
  r.engine_id = j.value("engine_id", "");
  r.prompt_hash = j.value("prompt_hash", "");
  r.word_count = j.value("word_count", word_count(r.text));
  r.target_words = j.value("target_words", std::size_t{0});
  r.unlabeled = j.value("unlabeled", false);
}

std::string_view to_string(TemplateMode mode) {
  switch (mode) {
    case TemplateMode::generic: return "generic";
    case TemplateMode::summary: return "summary";
    case TemplateMode::multi_hop: return "multi_hop";
    case TemplateMode::single_hop: return "single_hop";
  }
  return "generic";
}

TemplateMode template_mode_from_string(std::string_view name) {
  if (name == "generic") return TemplateMode::generic;
  if (name == "summary") return TemplateMode::summary;
  if (name == "multi_hop") return TemplateMode::multi_hop;
  if (name == "single_hop") return TemplateMode::single_hop;
  throw ConfigError("unknown template mode \"" + std::string(name) + "\"");
}

TemplateMode template_mode_for_task(std::string_view task) {
  std::string t = to_lower_ascii(task);
  t.erase(std::remove_if(t.begin(), t.end(), [](char c) { return c == '_' || c == '-' || c == ' '; }), t.end());
  for (const char* name : {"govreport", "multinews", "qmsum"}) {
    if (t == name) return TemplateMode::summary;
  }
  for (const char* name : {"2wikimultihopqa", "2wikiqa", "hotpotqa", "musique"}) {
    if (t == name) return TemplateMode::multi_hop;
  }
  for (const char* name : {"narrativeqa", "qasper"}) {
    if (t == name) return TemplateMode::single_hop;
  }
  return TemplateMode::generic;
}

void to_json(Json& j, const SynthesizedQA& qa) {
  j = Json{{"context_id", qa.context_id},   {"task", qa.task},
           {"context", qa.context},         {"question", qa.question},
           {"answer", qa.answer},           {"template_mode", to_string(qa.template_mode)},
           {"engine_id", qa.engine_id},     {"prompt_hash", qa.prompt_hash}};
}

void to_json(Json& j, const SynthesisFailure& f) { j = Json{{"id", f.id}, {"reason", f.reason}}; }

ChatRequest build_context_prompt(const InstructionPair& pair, std::size_t target_words,
                                 const std::string& engine_id) {
  if (target_words == 0) throw Error("target_words must be positive");
  // One pass per placeholder, fixed order; substituted text is never rescanned
  // for the placeholders that follow it, so literal "<answer>" in an
  // instruction survives.
  std::string user(prompts::kContextUser);
  auto splice = [&user](std::string_view placeholder, std::string_view value, std::size_t from) {
    std::size_t at = user.find(placeholder, from);
    user.replace(at, placeholder.size(), value);
    return at + value.size();
  };
  std::size_t pos = splice("<instruction>", pair.instruction, 0);
  pos = splice("<answer>", pair.answer, pos);
  splice("<words>", group_thousands(target_words), pos);

  ChatRequest req;
  req.system = std::string(prompts::kContextSystem);
  req.user = std::move(user);
  req.engine_id = engine_id;
  return req;
}

ParsedContext parse_context_response(std::string_view text) {
  static constexpr std::string_view kLabel = "Context:";
  std::string_view body = trim_left(text);
  ParsedContext out;
  if (body.substr(0, kLabel.size()) == kLabel) {
    body.remove_prefix(kLabel.size());
  } else {
    out.unlabeled = true;
  }
  body = trim(body);
  if (body.empty()) throw ParseError("context response is empty");
  out.text = std::string(body);
  return out;
}

ChatRequest build_instruction_prompt(std::string_view context, TemplateMode mode, const std::string& engine_id) {
  if (trim(context).empty()) throw Error("context must be non-empty");
  std::string_view tmpl;
  switch (mode) {
    case TemplateMode::generic: tmpl = prompts::kInstructionGenericUser; break;
    case TemplateMode::summary: tmpl = prompts::kInstructionSummaryUser; break;
    case TemplateMode::multi_hop: tmpl = prompts::kInstructionMultiHopUser; break;
    case TemplateMode::single_hop: tmpl = prompts::kInstructionSingleHopUser; break;
  }
  ChatRequest req;
  req.system = std::string(prompts::kInstructionSystem);
  req.user = std::string(tmpl);
  req.user.replace(req.user.find("<context>"), 9, context);
  req.engine_id = engine_id;
  return req;
}

ParsedQA parse_qa_response(std::string_view text) {
  static constexpr std::string_view kQuestion = "Question:";
  static constexpr std::string_view kAnswer = "Answer:";
  auto q = text.find(kQuestion);
  if (q == std::string_view::npos) throw ParseError("missing \"Question:\" marker");
  auto a = text.find(kAnswer, q + kQuestion.size());
  if (a == std::string_view::npos) throw ParseError("missing \"Answer:\" marker");
  ParsedQA out;
  out.question = std::string(trim(text.substr(q + kQuestion.size(), a - q - kQuestion.size())));
  out.answer = std::string(trim(text.substr(a + kAnswer.size())));
  if (out.question.empty()) throw ParseError("empty question");
  if (out.answer.empty()) throw ParseError("empty answer");
  return out;
}

ContextSynthesisResult synthesize_contexts(std::span<const InstructionPair> pairs, Engine& engine,
                                           std::size_t target_words, std::size_t max_in_flight,
                                           AuditLog* audit) {
  if (pairs.empty()) throw Error("no instruction pairs to synthesize contexts for");

  ContextSynthesisResult result;
  std::vector<const InstructionPair*> eligible;
  std::vector<ChatRequest> requests;
  // Failures are collected per pair index so the report follows input order.
  std::vector<std::optional<SynthesisFailure>> failure_at(pairs.size());
  std::vector<std::size_t> slot_of;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].requires_context) {
      failure_at[i] = SynthesisFailure{pairs[i].id, "pair does not require context"};
      continue;
    }
    eligible.push_back(&pairs[i]);
    slot_of.push_back(i);
    requests.push_back(build_context_prompt(pairs[i], target_words, engine.id()));
  }

  auto responses = complete_batch(engine, requests, max_in_flight);
  std::vector<std::optional<ContextRecord>> record_at(pairs.size());
  for (std::size_t k = 0; k < responses.size(); ++k) {
    const auto& item = responses[k];
    const InstructionPair& pair = *eligible[k];
    if (audit) audit->record(requests[k], item);
    if (!item.ok()) {
      failure_at[slot_of[k]] = SynthesisFailure{pair.id, item.error};
      continue;
    }
    try {
      auto parsed = parse_context_response(item.response->text);
      ContextRecord rec;
      rec.pair_id = pair.id;
      rec.task = pair.task;
      rec.instruction = pair.instruction;
      rec.answer = pair.answer;
      rec.word_count = word_count(parsed.text);
      rec.text = std::move(parsed.text);
      rec.engine_id = item.response->engine_id;
      rec.prompt_hash = item.response->prompt_hash;
      rec.target_words = target_words;
      rec.unlabeled = parsed.unlabeled;
      if (parsed.unlabeled) ++result.unlabeled;
      record_at[slot_of[k]] = std::move(rec);
    } catch (const ParseError& e) {
      failure_at[slot_of[k]] = SynthesisFailure{pair.id, std::string("parse error: ") + e.what()};
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (record_at[i]) result.records.push_back(std::move(*record_at[i]));
    if (failure_at[i]) result.failures.push_back(std::move(*failure_at[i]));
  }
  if (result.records.empty()) {
    throw Error("context synthesis failed for all " + std::to_string(pairs.size()) + " pairs" +
                (result.failures.empty() ? "" : " (first: " + result.failures.front().reason + ")"));
  }
  return result;
}

InstructionSynthesisResult synthesize_instructions(std::span<const InstructionSource> sources, Engine& engine,
                                                   std::optional<TemplateMode> mode, std::size_t max_in_flight,
                                                   AuditLog* audit) {
  if (sources.empty()) throw Error("no contexts to synthesize instructions from");
  std::vector<ChatRequest> requests;
  std::vector<TemplateMode> modes;
  for (const auto& s : sources) {
    TemplateMode m = mode.value_or(template_mode_for_task(s.task));
    modes.push_back(m);
    requests.push_back(build_instruction_prompt(s.context, m, engine.id()));
  }
  auto responses = complete_batch(engine, requests, max_in_flight);

  InstructionSynthesisResult result;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (audit) audit->record(requests[i], responses[i]);
    if (!responses[i].ok()) {
      result.failures.push_back({sources[i].id, responses[i].error});
      continue;
    }
    try {
      auto parsed = parse_qa_response(responses[i].response->text);
      SynthesizedQA qa;
      qa.context_id = sources[i].id;
      qa.task = sources[i].task;
      qa.context = sources[i].context;
      qa.question = std::move(parsed.question);
      qa.answer = std::move(parsed.answer);
      qa.template_mode = modes[i];
      qa.engine_id = responses[i].response->engine_id;
      qa.prompt_hash = responses[i].response->prompt_hash;
      result.records.push_back(std::move(qa));
    } catch (const ParseError& e) {
      result.failures.push_back({sources[i].id, std::string("parse error: ") + e.what()});
    }
  }
  if (result.records.empty()) {
    throw Error("instruction synthesis failed for all " + std::to_string(sources.size()) + " contexts");
  }
  return result;
}

}  // namespace ctxsynth
