#include "ctxsynth/scoring.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <unordered_map>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::EM: return "EM";
    case Metric::F1: return "F1";
    case Metric::RougeL: return "Rouge-L";
  }
  return "F1";
}

Metric metric_from_string(std::string_view name) {
  std::string n = to_lower_ascii(name);
  if (n == "em") return Metric::EM;
  if (n == "f1") return Metric::F1;
  if (n == "rouge_l" || n == "rougel" || n == "rouge-l") return Metric::RougeL;
  throw ConfigError("unknown metric \"" + std::string(name) + "\"");
}

double score_em(std::string_view pred, std::span<const std::string> gold_values) {
  if (gold_values.empty()) throw Error("EM needs at least one gold value");
  std::size_t hits = 0;
  for (const auto& g : gold_values) {
    if (pred.find(g) != std::string_view::npos) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold_values.size());
}

std::string normalize_answer(std::string_view s) {
  std::string stripped;
  stripped.reserve(s.size());
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    stripped += static_cast<char>(std::tolower(u));
  }
  std::string out;
  for (auto tok : split_whitespace(stripped)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out += ' ';
    out.append(tok);
  }
  return out;
}

double score_f1(std::string_view pred, std::string_view gold) {
  std::string np = normalize_answer(pred);
  std::string ng = normalize_answer(gold);
  auto pt = split_whitespace(np);
  auto gt = split_whitespace(ng);
  if (pt.empty() || gt.empty()) return pt.empty() && gt.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string_view, long> bag;
  for (auto t : gt) ++bag[t];
  std::size_t common = 0;
  for (auto t : pt) {
    auto it = bag.find(t);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double p = static_cast<double>(common) / static_cast<double>(pt.size());
  double r = static_cast<double>(common) / static_cast<double>(gt.size());
  return 2 * p * r / (p + r);
}

std::size_t lcs_length(std::span<const std::string_view> a, std::span<const std::string_view> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double score_rouge_l(std::string_view pred, std::string_view gold) {
  std::string lp = to_lower_ascii(pred);
  std::string lg = to_lower_ascii(gold);
  auto pt = split_whitespace(lp);
  auto gt = split_whitespace(lg);
  if (pt.empty() || gt.empty()) return 0.0;
  std::size_t lcs = lcs_length(pt, gt);
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(pt.size());
  double r = static_cast<double>(lcs) / static_cast<double>(gt.size());
  return 2 * p * r / (p + r);
}

ScoreReport aggregate(std::vector<SampleScore> scores, const std::string& task, Metric metric) {
  if (scores.empty()) throw Error("cannot aggregate an empty score list for task \"" + task + "\"");
  ScoreReport r;
  r.task = task;
  r.metric = metric;
  long double sum = 0;
  for (const auto& s : scores) sum += s.score;
  r.mean_x100 = static_cast<double>(100.0L * sum / static_cast<long double>(scores.size()));
  r.per_sample = std::move(scores);
  return r;
}

std::string format_score(double value_x100) { return fmt::format("{:.2f}", value_x100); }

Json to_json(const ScoreReport& r, bool include_samples) {
  Json j{{"task", r.task},
         {"metric", to_string(r.metric)},
         {"n", r.per_sample.size()},
         {"mean_x100", r.mean_x100},
         {"display", format_score(r.mean_x100)}};
  if (include_samples) {
    Json samples = Json::array();
    for (const auto& s : r.per_sample) samples.push_back({{"sample_id", s.sample_id}, {"score", s.score}});
    j["per_sample"] = samples;
  }
  return j;
}

ScoreReport score_report_from_json(const Json& j) {
  ScoreReport r;
  r.task = j.at("task").get<std::string>();
  r.metric = metric_from_string(j.value("metric", "f1"));
  r.mean_x100 = j.at("mean_x100").get<double>();
  if (j.contains("per_sample")) {
    for (const auto& s : j.at("per_sample")) {
      r.per_sample.push_back({s.at("sample_id").get<std::string>(), s.at("score").get<double>()});
    }
  }
  return r;
}

Json to_json(const GapReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"task", row.task},
                    {"context_free_mean", row.context_free_mean},
                    {"context_included_mean", row.context_included_mean},
                    {"gap", row.gap},
                    {"low_coherence", row.low_coherence}});
  }
  return Json{{"threshold", r.threshold}, {"rows", rows}};
}

GapReport gap_report(std::span<const ScoreReport> free, std::span<const ScoreReport> included, double threshold) {
  auto index = [](std::span<const ScoreReport> reports, const char* side) {
    std::map<std::string, double> by_task;
    for (const auto& r : reports) {
      if (!by_task.emplace(r.task, r.mean_x100).second) {
        throw Error(std::string("duplicate task \"") + r.task + "\" in " + side + " reports");
      }
    }
    return by_task;
  };
  auto f = index(free, "context-free");
  auto inc = index(included, "context-included");

  std::vector<std::string> only_free, only_included;
  for (const auto& [task, _] : f) {
    if (!inc.count(task)) only_free.push_back(task);
  }
  for (const auto& [task, _] : inc) {
    if (!f.count(task)) only_included.push_back(task);
  }
  if (!only_free.empty() || !only_included.empty()) {
    throw Error("task sets differ; only in context-free: [" + join(only_free, ", ") +
                "]; only in context-included: [" + join(only_included, ", ") + "]");
  }

  GapReport report;
  report.threshold = threshold;
  for (const auto& [task, free_mean] : f) {
    GapRow row;
    row.task = task;
    row.context_free_mean = free_mean;
    row.context_included_mean = inc.at(task);
    row.gap = row.context_included_mean - row.context_free_mean;
    row.low_coherence = row.gap <= threshold;
    report.rows.push_back(row);
  }
  return report;
}

namespace {

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      // First column left-aligned, numbers right-aligned.
      out += c == 0 ? fmt::format("{:<{}}", cells[c], width[c]) : fmt::format("{:>{}}", cells[c], width[c]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = std::accumulate(width.begin(), width.end(), std::size_t{0}) + 2 * (width.size() - 1);
  out += std::string(total, '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace

std::string render_score_table(std::span<const ScoreReport> reports) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.task, std::string(to_string(r.metric)), std::to_string(r.per_sample.size()),
                    format_score(r.mean_x100)});
  }
  return render_table({"task", "metric", "n", "score"}, rows);
}

std::string render_gap_table(const GapReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({r.task, format_score(r.context_free_mean), format_score(r.context_included_mean),
                    format_score(r.gap), r.low_coherence ? "low-coherence" : ""});
  }
  return render_table({"task", "free", "included", "gap", "flag"}, rows);
}

GoldRecord gold_from_json(const Json& j, const std::string& default_task) {
  GoldRecord g;
  for (const char* key : {"sample_id", "id", "pair_id"}) {
    if (j.contains(key)) {
      g.sample_id = j.at(key).get<std::string>();
      break;
    }
  }
  if (g.sample_id.empty()) throw InputError("gold record has no sample_id/id/pair_id");
  g.task = j.value("task", j.contains("variant") ? j.at("variant").get<std::string>() : default_task);
  for (const char* key : {"gold_values", "gold", "answers", "answer"}) {
    if (!j.contains(key)) continue;
    const Json& v = j.at(key);
    if (v.is_string()) g.values = {v.get<std::string>()};
    else g.values = v.get<std::vector<std::string>>();
    break;
  }
  if (g.values.empty()) throw InputError("gold record \"" + g.sample_id + "\" has no gold answer");
  return g;
}

ScoringOutcome score_dataset(const std::map<std::string, std::string>& predictions,
                             std::span<const GoldRecord> gold, Metric metric) {
  std::set<std::string> gold_ids;
  for (const auto& g : gold) gold_ids.insert(g.sample_id);
  for (const auto& [id, _] : predictions) {
    if (!gold_ids.count(id)) throw InputError("prediction \"" + id + "\" has no gold record");
  }

  ScoringOutcome outcome;
  std::map<std::string, std::vector<SampleScore>> by_task;
  for (const auto& g : gold) {
    auto it = predictions.find(g.sample_id);
    double score = 0.0;
    if (it == predictions.end()) {
      outcome.missing_predictions.push_back(g.sample_id);
    } else if (metric == Metric::EM) {
      score = score_em(it->second, g.values);
    } else {
      for (const auto& alt : g.values) {
        score = std::max(score, metric == Metric::F1 ? score_f1(it->second, alt) : score_rouge_l(it->second, alt));
      }
    }
    by_task[g.task].push_back({g.sample_id, score});
  }
  for (auto& [task, scores] : by_task) outcome.reports.push_back(aggregate(std::move(scores), task, metric));
  return outcome;
}

}  // namespace ctxsynth
