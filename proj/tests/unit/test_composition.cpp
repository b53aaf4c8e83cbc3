#include <doctest.h>

#include <set>

#include "ctxsynth/composition.hpp"
#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"
#include "support.hpp"

using namespace ctxsynth;

namespace {
std::vector<ContextRecord> make_pool(std::size_t n, std::size_t tasks = 4) {
  std::vector<ContextRecord> pool;
  for (std::size_t i = 0; i < n; ++i) {
    ContextRecord r;
    r.pair_id = "p" + std::to_string(i);
    r.task = "task" + std::to_string(i % tasks);
    r.instruction = "question " + std::to_string(i);
    r.answer = "answer " + std::to_string(i);
    r.text = "Block " + std::to_string(i) + " text.";
    pool.push_back(r);
  }
  return pool;
}
}  // namespace

TEST_CASE("concatenate") {
  auto pool = make_pool(30);
  auto s = concatenate(pool[0], pool, 10, 5);
  CHECK(s.n_contexts == 10);
  REQUIRE(s.component_ids.size() == 10);
  CHECK(s.component_ids[s.relevant_index] == "p0");
  CHECK(std::count(s.component_ids.begin(), s.component_ids.end(), "p0") == 1);
  CHECK(std::set<std::string>(s.component_ids.begin(), s.component_ids.end()).size() == 10);
  CHECK(count_occurrences(s.context_text, "\n\n") == 9);
  CHECK(s.answer == pool[0].answer);

  auto one = concatenate(pool[3], pool, 1, 9);
  CHECK(one.context_text == pool[3].text);
  CHECK(one.relevant_index == 0);

  CHECK(concatenate(pool[0], pool, 10, 5) == s);
  CHECK_THROWS_AS(concatenate(pool[0], std::span(pool).first(5), 10, 1), Error);
  CHECK_THROWS_AS(concatenate(pool[0], pool, 0, 1), Error);

  auto same = concatenate(pool[0], pool, 5, 2, true);
  for (const auto& id : same.component_ids) {
    auto idx = std::stoul(id.substr(1));
    CHECK(idx % 4 == 0);
  }
  CHECK_THROWS(concatenate(pool[0], pool, 9, 2, true));  // only 7 other pairs in task0

  // Duplicate pair ids in the pool count once.
  std::vector<ContextRecord> dup{pool[1], pool[1], pool[1]};
  CHECK_THROWS(concatenate(pool[0], dup, 3, 1));
}

TEST_CASE("relevant_index is uniform") {
  auto pool = make_pool(50);
  std::vector<std::size_t> hist(5, 0);
  for (std::uint64_t t = 0; t < 1000; ++t) ++hist[concatenate(pool[t % 50], pool, 5, mix_seed(11, t)).relevant_index];
  CHECK(testsupport::chi_square_uniform_p(hist) > 0.01);
}

TEST_CASE("compose_dataset is position independent") {
  auto pool = make_pool(40);
  ComposeOptions opt{.n = 5, .seed = 3};
  auto all = compose_dataset(pool, pool, opt);
  CHECK(all.size() == 40);
  std::vector<ContextRecord> tail(pool.begin() + 20, pool.end());
  auto part = compose_dataset(tail, pool, opt);
  CHECK(part[0] == all[20]);
}

TEST_CASE("context-free variant") {
  auto pool = make_pool(12);
  auto s = concatenate(pool[0], pool, 10, 5);
  auto f = make_context_free(s);
  CHECK(f.answer == s.answer);
  CHECK(f.instruction == s.instruction);
  CHECK(f.n_contexts == 0);
  CHECK(f.context_free);
  CHECK(f.context_text.empty());
  CHECK_THROWS(make_context_free(f));

  CHECK(assemble_prompt(f).prompt == f.instruction);
}

TEST_CASE("assemble_prompt") {
  ComposedSample s;
  s.pair_id = "x";
  s.context_text = "C";
  s.instruction = "I";
  s.answer = "A";
  s.n_contexts = 1;
  auto r = assemble_prompt(s);
  CHECK(r.prompt == "C\n\nI");
  CHECK(r.answer == "A");
  CHECK(r.id == "x");
  PromptLayout l = prompt_layout_from_json(Json{{"context_prefix", "Passage:\n"}, {"instruction_prefix", "Q: "}});
  auto p = assemble_prompt(s, l).prompt;
  CHECK(p == "Passage:\nC\n\nQ: I");
  CHECK(prompt_layout_from_json(to_json(l)) == l);
}

TEST_CASE("length statistics") {
  auto one = summarize_lengths({100});
  CHECK(one.min == 100);
  CHECK(one.p25 == 100);
  CHECK(one.median == 100);
  CHECK(one.p75 == 100);
  CHECK(one.max == 100);
  auto three = summarize_lengths({30, 10, 20});
  CHECK(three.mean == 20);
  CHECK(three.median == 20);
  CHECK(three.p25 == 15);
  auto four = summarize_lengths({1, 2, 3, 4});
  CHECK(four.median == doctest::Approx(2.5));
  CHECK(four.p25 == doctest::Approx(1.75));
  CHECK_THROWS(summarize_lengths({}));

  // Independent recount of the fixture corpus.
  auto corpus = load_haystack(testsupport::data_dir() / "haystack");
  std::vector<TrainingRecord> recs;
  std::vector<std::size_t> counts;
  for (const auto& d : corpus.documents) {
    recs.push_back({d.id, d.text, "a", std::nullopt, std::nullopt});
    counts.push_back(testsupport::split_words(d.text).size());
  }
  auto a = length_stats(recs, WhitespaceCounter{});
  auto b = summarize_lengths(counts);
  CHECK(to_json(a, true) == to_json(b, true));
}

TEST_CASE("composed sample round trip") {
  auto pool = make_pool(12);
  auto s = concatenate(pool[2], pool, 4, 8);
  Json j = s;
  CHECK(j.get<ComposedSample>() == s);
}
