#include <doctest.h>

#include <random>

#include "ctxsynth/error.hpp"
#include "ctxsynth/scoring.hpp"
#include "ctxsynth/text.hpp"
#include "score_fixtures.hpp"
#include "support.hpp"

using namespace ctxsynth;

TEST_CASE("exact match") {
  const std::string u = "3f2b6c1e-9d4a-4e8b-a1c2-7b9e0d5f6a31";
  std::vector<std::string> one{u};
  CHECK(score_em("The number is " + u + ".", one) == 1.0);
  std::vector<std::string> four{"11111111-0000-4000-8000-000000000001", "11111111-0000-4000-8000-000000000002",
                                "11111111-0000-4000-8000-000000000003", "11111111-0000-4000-8000-000000000004"};
  CHECK(score_em(four[0] + " and " + four[2], four) == 0.5);
  CHECK(score_em("3f2b6c1e-9d4a-4e8b\n-a1c2-7b9e0d5f6a31", one) == 0.0);
  CHECK_THROWS(score_em("x", std::vector<std::string>{}));
}

TEST_CASE("f1 fixtures") {
  for (const auto& c : testsupport::kF1Cases) {
    CAPTURE(c.pred);
    CAPTURE(c.gold);
    CHECK(std::abs(score_f1(c.pred, c.gold) - c.expected) <= testsupport::kScoreTolerance);
  }
  CHECK(normalize_answer("The  Quick, brown fox!") == "quick brown fox");
}

TEST_CASE("rouge-l fixtures") {
  for (const auto& c : testsupport::kRougeCases) {
    CAPTURE(c.pred);
    CAPTURE(c.gold);
    CHECK(std::abs(score_rouge_l(c.pred, c.gold) - c.expected) <= testsupport::kScoreTolerance);
  }
}

TEST_CASE("rouge-l against brute-force LCS") {
  const char* vocab[] = {"a", "b", "c", "d", "the", "cat"};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto make = [&] {
      std::string s;
      std::size_t n = rng() % 9;
      for (std::size_t k = 0; k < n; ++k) s += std::string(k ? " " : "") + vocab[rng() % 6];
      return s;
    };
    std::string p = make(), g = make();
    CAPTURE(p);
    CAPTURE(g);
    CHECK(std::abs(score_rouge_l(p, g) - testsupport::rouge_l_oracle(p, g)) <= testsupport::kScoreTolerance);
  }
}

TEST_CASE("aggregate") {
  auto r = aggregate({{"a", 1.0}, {"b", 0.0}}, "t", Metric::F1);
  CHECK(format_score(r.mean_x100) == "50.00");
  CHECK(format_score(33.4249) == "33.42");
  CHECK_THROWS(aggregate({}, "t", Metric::F1));

  std::vector<SampleScore> all;
  for (int i = 0; i < 200; ++i) all.push_back({"n" + std::to_string(i), (i % 7) / 7.0});
  auto whole = aggregate(all, "narrativeqa", Metric::F1);
  CHECK(whole.per_sample.size() == 200);
  // Equal-size partitions average back to the whole.
  std::vector<SampleScore> left(all.begin(), all.begin() + 100), right(all.begin() + 100, all.end());
  double combined = (aggregate(left, "x", Metric::F1).mean_x100 + aggregate(right, "x", Metric::F1).mean_x100) / 2;
  CHECK(combined == doctest::Approx(whole.mean_x100).epsilon(1e-12));
  // Unequal partitions combine by size.
  std::vector<SampleScore> small(all.begin(), all.begin() + 30), big(all.begin() + 30, all.end());
  double weighted = (30 * aggregate(small, "x", Metric::F1).mean_x100 + 170 * aggregate(big, "x", Metric::F1).mean_x100) / 200;
  CHECK(weighted == doctest::Approx(whole.mean_x100).epsilon(1e-12));

  auto back = score_report_from_json(to_json(whole));
  CHECK(back.task == "narrativeqa");
  CHECK(back.mean_x100 == whole.mean_x100);
  CHECK(metric_from_string("Rouge-L") == Metric::RougeL);
  CHECK_THROWS_AS(metric_from_string("bleu"), ConfigError);
}

TEST_CASE("gap report") {
  ScoreReport a{"qa", Metric::F1, {}, 20.0};
  ScoreReport b{"qa", Metric::F1, {}, 35.0};
  auto g = gap_report(std::vector{a}, std::vector{b}, 1.0);
  REQUIRE(g.rows.size() == 1);
  CHECK(g.rows[0].gap == 15.0);
  CHECK_FALSE(g.rows[0].low_coherence);

  std::vector<ScoreReport> same{a, ScoreReport{"sum", Metric::RougeL, {}, 12.5}};
  auto id = gap_report(same, same, 1.0);
  for (const auto& r : id.rows) {
    CHECK(r.gap == 0.0);
    CHECK(r.low_coherence);
  }
  CHECK_THROWS(gap_report(std::vector{a}, std::vector{ScoreReport{"other", Metric::F1, {}, 1.0}}, 1.0));
  CHECK(render_gap_table(g).find("15.00") != std::string::npos);
}

TEST_CASE("score_dataset") {
  std::vector<GoldRecord> gold{{"s1", "qa", {"Paris"}}, {"s2", "qa", {"blue", "navy blue"}}, {"s3", "qa", {"x"}}};
  std::map<std::string, std::string> pred{{"s1", "paris"}, {"s2", "navy blue"}};
  auto out = score_dataset(pred, gold, Metric::F1);
  REQUIRE(out.reports.size() == 1);
  CHECK(out.missing_predictions == std::vector<std::string>{"s3"});
  CHECK(out.reports[0].mean_x100 == doctest::Approx(200.0 / 3.0));
  pred["zz"] = "stray";
  CHECK_THROWS(score_dataset(pred, gold, Metric::F1));

  auto g = gold_from_json(Json{{"id", "n1"}, {"gold_values", {"u1", "u2"}}});
  CHECK(g.values.size() == 2);
  CHECK(gold_from_json(Json{{"pair_id", "p"}, {"answer", "A"}}).values == std::vector<std::string>{"A"});
}
