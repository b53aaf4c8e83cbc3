#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "ctxsynth/config.hpp"
#include "ctxsynth/error.hpp"
#include "ctxsynth/packing.hpp"
#include "support.hpp"

using namespace ctxsynth;

namespace {

TrainingRecord rec(const std::string& id, std::size_t prompt, std::size_t answer) {
  return {id, "", "", prompt, answer};
}

std::set<std::string> ids_of(const PackedSequence& p) {
  std::set<std::string> out;
  for (const auto& s : p.segments) out.insert(s.record_id);
  return out;
}

}  // namespace

TEST_CASE("first-fit decreasing") {
  WhitespaceCounter ws;
  std::vector<TrainingRecord> r{rec("a", 25, 5), rec("b", 15, 5), rec("c", 5, 5)};
  auto res = pack(r, 40, ws);
  REQUIRE(res.packs.size() == 2);
  CHECK(ids_of(res.packs[0]) == std::set<std::string>{"a", "c"});
  CHECK(ids_of(res.packs[1]) == std::set<std::string>{"b"});
  CHECK(testsupport::brute_force_bins({30, 20, 10}, 40) == 2);
  CHECK(res.packs[0].segments[1].offset == 30);

  auto exact = pack(std::vector{rec("x", 60, 4)}, 64, ws);
  REQUIRE(exact.packs.size() == 1);
  CHECK(exact.packs[0].total_tokens == 64);

  auto over = pack(std::vector{rec("big", 70, 1), rec("ok", 3, 1)}, 64, ws);
  CHECK(over.oversize.size() == 1);
  CHECK(over.oversize[0].record_id == "big");
  CHECK(over.packs.size() == 1);
  CHECK_THROWS(pack(std::vector{rec("big", 70, 1)}, 64, ws));
  CHECK_THROWS(pack(r, 0, ws));

  // Token counts fall back to the counter.
  TrainingRecord plain{"p", "one two three", "four", std::nullopt, std::nullopt};
  auto counted = pack(std::vector{plain}, 10, ws);
  CHECK(counted.packs[0].segments[0].prompt_tokens == 3);
  CHECK(counted.packs[0].segments[0].answer_tokens == 1);
}

TEST_CASE("max_len presets") {
  CHECK(max_len_preset("64k") == 65536);
  CHECK(max_len_preset("32k") == 32768);
  CHECK_THROWS_AS(max_len_preset("16k"), ConfigError);
  auto res = pack(std::vector{rec("a", 60000, 100)}, kMaxLen64k, WhitespaceCounter{});
  CHECK(res.packs[0].max_len == 65536);
}

TEST_CASE("loss weights") {
  WhitespaceCounter ws;
  auto single = pack(std::vector{rec("a", 3, 10)}, 100, ws).packs;
  loss_weights(single);
  CHECK(single[0].segments[0].loss_weight == doctest::Approx(0.1));

  auto two = pack(std::vector{rec("a", 3, 5), rec("b", 3, 20)}, 100, ws).packs;
  loss_weights(two);
  for (const auto& s : two[0].segments) CHECK(s.loss_weight * double(s.answer_tokens) == doctest::Approx(0.5));

  auto zero = pack(std::vector{rec("z", 3, 0)}, 100, ws).packs;
  CHECK_THROWS_WITH(loss_weights(zero), doctest::Contains("\"z\""));
}

TEST_CASE("random instances against brute force") {
  WhitespaceCounter ws;
  std::mt19937_64 rng(21);
  for (int inst = 0; inst < 200; ++inst) {
    std::size_t n = 1 + rng() % 8;
    std::size_t cap = 20 + rng() % 80;
    std::vector<TrainingRecord> records;
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t answer = 1 + rng() % 5;
      std::size_t prompt = rng() % (cap - answer + 1);
      records.push_back(rec("r" + std::to_string(i), prompt, answer));
      sizes.push_back(prompt + answer);
    }
    auto res = pack(records, cap, ws);
    CHECK(res.oversize.empty());
    CHECK(res.packs.size() <= testsupport::brute_force_bins(sizes, cap) + 1);
    std::size_t placed = 0;
    for (const auto& p : res.packs) {
      CHECK(p.total_tokens <= cap);
      placed += p.segments.size();
    }
    CHECK(placed == n);
  }
}

TEST_CASE("training record round trip") {
  TrainingRecord r{"id", "p", "a", 3, std::nullopt};
  Json j = r;
  auto back = j.get<TrainingRecord>();
  CHECK(back.prompt_tokens == 3u);
  CHECK_FALSE(back.answer_tokens.has_value());
}
