#include <doctest.h>

#include "ctxsynth/error.hpp"
#include "ctxsynth/synthesis.hpp"
#include "ctxsynth/text.hpp"
#include "support.hpp"

using namespace ctxsynth;
using testsupport::golden;
using testsupport::substitute;

namespace {
InstructionPair pair(const std::string& id, const std::string& q, const std::string& a, const std::string& task = "t") {
  return {id, task, q, a, {}, true};
}
}  // namespace

TEST_CASE("context prompt") {
  auto r = build_context_prompt(pair("p", "q1", "a1"), 2000);
  CHECK(r.user.find("Context: [MISSING]") != std::string::npos);
  CHECK(r.user.find("Question: q1") != std::string::npos);
  CHECK(r.user.find("Answer: a1") != std::string::npos);
  CHECK(r.user.find("approximately 2,000 words") != std::string::npos);
  CHECK(build_context_prompt(pair("p", "q1", "a1"), 500).user.find("approximately 500 words") != std::string::npos);
  CHECK(prompt_hash(r) == prompt_hash(build_context_prompt(pair("p", "q1", "a1"), 2000)));

  auto expected = substitute(substitute(golden("context_user.txt"), "<instruction>", "q1"), "<answer>", "a1");
  CHECK(r.user == expected);
  CHECK(r.system == golden("context_system.txt"));

  // Placeholder text inside the pair is not substituted again.
  auto tricky = build_context_prompt(pair("p", "what is <answer>?", "<words>"), 2000);
  CHECK(tricky.user.find("Question: what is <answer>?\nAnswer: <words>\n") != std::string::npos);
}

TEST_CASE("parse_context_response") {
  CHECK(parse_context_response("Context: Harry Kane, born...").text == "Harry Kane, born...");
  CHECK_FALSE(parse_context_response("Context: Harry Kane, born...").unlabeled);
  auto p = parse_context_response("No label body");
  CHECK(p.text == "No label body");
  CHECK(p.unlabeled);
  CHECK_THROWS_AS(parse_context_response("Context:   "), ParseError);
  CHECK_THROWS_AS(parse_context_response(""), ParseError);
}

TEST_CASE("instruction prompts") {
  CHECK(build_instruction_prompt("C", TemplateMode::generic).user.find("Write a question based on this context") !=
        std::string::npos);
  CHECK(build_instruction_prompt("C", TemplateMode::summary).user.find("seeking a summary across the entire context") !=
        std::string::npos);
  CHECK(build_instruction_prompt("C", TemplateMode::multi_hop).user.find("requiring multi-hop reasoning") !=
        std::string::npos);
  const std::pair<TemplateMode, const char*> files[] = {{TemplateMode::generic, "instruction_generic_user.txt"},
                                                        {TemplateMode::summary, "instruction_summary_user.txt"},
                                                        {TemplateMode::multi_hop, "instruction_multi_hop_user.txt"},
                                                        {TemplateMode::single_hop, "instruction_single_hop_user.txt"}};
  for (auto [mode, file] : files) {
    auto r = build_instruction_prompt("The passage.", mode);
    CHECK(r.user == substitute(golden(file), "<context>", "The passage."));
    CHECK(r.system == golden("instruction_system.txt"));
  }
  CHECK_THROWS(build_instruction_prompt("  ", TemplateMode::generic));

  CHECK(template_mode_for_task("GovReport") == TemplateMode::summary);
  CHECK(template_mode_for_task("qmsum") == TemplateMode::summary);
  CHECK(template_mode_for_task("hotpotqa") == TemplateMode::multi_hop);
  CHECK(template_mode_for_task("narrativeqa") == TemplateMode::single_hop);
  CHECK(template_mode_for_task("trec") == TemplateMode::generic);
  CHECK(template_mode_from_string("multi_hop") == TemplateMode::multi_hop);
  CHECK_THROWS_AS(template_mode_from_string("fancy"), ConfigError);
}

TEST_CASE("parse_qa_response") {
  auto a = parse_qa_response("Question: Who? Answer: Kane");
  CHECK(a.question == "Who?");
  CHECK(a.answer == "Kane");
  CHECK_THROWS_AS(parse_qa_response("Answer: x"), ParseError);
  auto b = parse_qa_response("prefix Question: q\nAnswer: a");
  CHECK(b.question == "q");
  CHECK(b.answer == "a");
  CHECK_THROWS_AS(parse_qa_response("Question: q"), ParseError);
  CHECK_THROWS_AS(parse_qa_response("Question: Answer: a"), ParseError);
}

TEST_CASE("synthesize_contexts") {
  MockEngine mock(MockEngineConfig{});
  std::vector<InstructionPair> pairs;
  for (int i = 0; i < 1600; ++i) pairs.push_back(pair("p" + std::to_string(i), "q" + std::to_string(i), "a"));
  auto r = synthesize_contexts(pairs, mock, 2000, 8);
  CHECK(r.records.size() == 1600);
  CHECK(r.failures.empty());
  CHECK(r.records[17].pair_id == "p17");
  CHECK(r.records[17].text.find("q17") != std::string::npos);
  CHECK(r.records[17].word_count == word_count(r.records[17].text));

  CHECK_THROWS(synthesize_contexts(std::span<const InstructionPair>{}, mock, 2000, 1));

  MockEngineConfig bad;
  bad.rules.push_back({"Question: broken", "Context:"});
  MockEngine faulty(bad);
  std::vector<InstructionPair> three{pair("a", "fine", "x"), pair("b", "broken", "x"), pair("c", "fine too", "x")};
  AuditLog audit;
  auto f = synthesize_contexts(three, faulty, 300, 2, &audit);
  CHECK(f.records.size() == 2);
  REQUIRE(f.failures.size() == 1);
  CHECK(f.failures[0].id == "b");
  CHECK(audit.entries().size() == 3);

  std::vector<InstructionPair> none{pair("z", "q", "a")};
  none[0].requires_context = false;
  CHECK_THROWS(synthesize_contexts(none, mock, 300, 1));

  MockEngineConfig unlabeled;
  unlabeled.rules.push_back({"", "Just text."});
  MockEngine u(unlabeled);
  auto ur = synthesize_contexts(three, u, 300, 1);
  CHECK(ur.unlabeled == 3);
  CHECK(ur.records[0].unlabeled);
}

TEST_CASE("synthesize_instructions") {
  MockEngine mock(MockEngineConfig{});
  std::vector<InstructionSource> src{{"c1", "govreport", "Alpha beta gamma."}, {"c2", "hotpotqa", "Delta."}};
  auto r = synthesize_instructions(src, mock, std::nullopt, 2);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].template_mode == TemplateMode::summary);
  CHECK(r.records[1].template_mode == TemplateMode::multi_hop);
  CHECK(r.records[0].answer == "Alpha beta gamma.");
  auto g = synthesize_instructions(src, mock, TemplateMode::generic, 1);
  CHECK(g.records[1].template_mode == TemplateMode::generic);
}

TEST_CASE("context record round trip") {
  ContextRecord r{"p", "t", "q", "a", "text", "mock", "h", 1, 2000, true};
  Json j = r;
  CHECK(j.get<ContextRecord>() == r);
}
