#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxsynth/jsonl.hpp"

namespace ctxsynth {

enum class Metric { EM, F1, RougeL };

std::string_view to_string(Metric m);
/// Accepts "em", "f1", "rouge_l", "rougel", "rouge-l" in any case.
Metric metric_from_string(std::string_view name);

/// Fraction of gold values occurring verbatim in `pred`. Throws if gold is empty.
double score_em(std::string_view pred, std::span<const std::string> gold_values);

/// SQuAD-style normalization: lowercase, drop ASCII punctuation, drop the
/// articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

/// Bag-of-tokens F1 over normalized answers. Both sides empty scores 1,
/// exactly one side empty scores 0.
double score_f1(std::string_view pred, std::string_view gold);

/// Length of the longest common subsequence of two token sequences.
std::size_t lcs_length(std::span<const std::string_view> a, std::span<const std::string_view> b);

/// LCS F-measure over lowercased whitespace tokens, equal weight on
/// precision and recall. 0 when either side is empty.
double score_rouge_l(std::string_view pred, std::string_view gold);

struct SampleScore {
  std::string sample_id;
  double score = 0.0;
};

struct ScoreReport {
  std::string task;
  Metric metric = Metric::F1;
  std::vector<SampleScore> per_sample;
  double mean_x100 = 0.0;  // unrounded
};

Json to_json(const ScoreReport& r, bool include_samples = true);
ScoreReport score_report_from_json(const Json& j);

/// 100 x arithmetic mean. Throws on empty input.
ScoreReport aggregate(std::vector<SampleScore> scores, const std::string& task, Metric metric);

/// Two-decimal display form, e.g. 33.42.
std::string format_score(double value_x100);

struct GapRow {
  std::string task;
  double context_free_mean = 0.0;
  double context_included_mean = 0.0;
  double gap = 0.0;  // included - free
  bool low_coherence = false;
};

struct GapReport {
  std::vector<GapRow> rows;
  double threshold = 0.0;
};

Json to_json(const GapReport& r);

/// Per-task gap between context-included and context-free tuning. Rows with
/// gap <= threshold are flagged low_coherence. Throws when the task sets differ.
GapReport gap_report(std::span<const ScoreReport> free, std::span<const ScoreReport> included,
                     double threshold = 1.0);

std::string render_score_table(std::span<const ScoreReport> reports);
std::string render_gap_table(const GapReport& report);

/// Gold answers for one sample. EM requires every value; F1 and Rouge-L take
/// the best score over the alternatives.
struct GoldRecord {
  std::string sample_id;
  std::string task;
  std::vector<std::string> values;
};

/// Reads a gold record from a NIAH sample ("gold_values"), a composed or
/// training record ("answer"), or a plain {"gold": ...} record. The id comes
/// from "sample_id", "id" or "pair_id".
GoldRecord gold_from_json(const Json& j, const std::string& default_task = "default");

struct ScoringOutcome {
  std::vector<ScoreReport> reports;  // one per task, ordered by task
  std::vector<std::string> missing_predictions;
};

/// Scores predictions (sample_id -> text) against gold. A gold sample without
/// a prediction scores 0 and is listed; a prediction without gold throws.
ScoringOutcome score_dataset(const std::map<std::string, std::string>& predictions,
                             std::span<const GoldRecord> gold, Metric metric);

}  // namespace ctxsynth
