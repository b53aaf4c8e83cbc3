#include "ctxsynth/composition.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_set>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

void to_json(Json& j, const ComposedSample& s) {
  j = Json{{"pair_id", s.pair_id},
           {"task", s.task},
           {"context_text", s.context_text},
           {"instruction", s.instruction},
           {"answer", s.answer},
           {"n_contexts", s.n_contexts},
           {"relevant_index", s.relevant_index},
           {"component_ids", s.component_ids},
           {"context_free", s.context_free},
           {"seed", s.seed}};
}

void from_json(const Json& j, ComposedSample& s) {
  s.pair_id = j.at("pair_id").get<std::string>();
  s.task = j.value("task", "");
  s.context_text = j.value("context_text", "");
  s.instruction = j.at("instruction").get<std::string>();
  s.answer = j.at("answer").get<std::string>();
  s.n_contexts = j.value("n_contexts", std::size_t{0});
  s.relevant_index = j.value("relevant_index", std::size_t{0});
  s.component_ids = j.value("component_ids", std::vector<std::string>{});
  s.context_free = j.value("context_free", false);
  s.seed = j.value("seed", std::uint64_t{0});
}

ComposedSample concatenate(const ContextRecord& record, std::span<const ContextRecord> pool, std::size_t n,
                           std::uint64_t seed, bool same_task_only) {
  if (n < 1) throw Error("concatenation size must be >= 1");

  std::vector<const ContextRecord*> candidates;
  std::unordered_set<std::string> seen{record.pair_id};
  for (const auto& c : pool) {
    if (same_task_only && c.task != record.task) continue;
    if (seen.insert(c.pair_id).second) candidates.push_back(&c);
  }
  if (candidates.size() < n - 1) {
    throw Error("distractor pool too small for \"" + record.pair_id + "\": need " + std::to_string(n - 1) +
                ", have " + std::to_string(candidates.size()));
  }

  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first n-1 slots become a uniform sample.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  std::vector<const ContextRecord*> blocks(candidates.begin(), candidates.begin() + static_cast<long>(n - 1));
  blocks.push_back(&record);
  std::shuffle(blocks.begin(), blocks.end(), rng);

  ComposedSample s;
  s.pair_id = record.pair_id;
  s.task = record.task;
  s.instruction = record.instruction;
  s.answer = record.answer;
  s.n_contexts = n;
  s.seed = seed;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i] == &record) s.relevant_index = i;
    if (i) s.context_text += kBlockSeparator;
    s.context_text += blocks[i]->text;
    s.component_ids.push_back(blocks[i]->pair_id);
  }
  return s;
}

std::vector<ComposedSample> compose_dataset(std::span<const ContextRecord> records,
                                            std::span<const ContextRecord> pool, const ComposeOptions& options) {
  std::vector<ComposedSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(concatenate(r, pool, options.n, mix_seed(options.seed, stable_hash64(r.pair_id)),
                              options.same_task_only));
  }
  return out;
}

ComposedSample make_context_free(const ComposedSample& sample) {
  if (sample.context_free) throw Error("sample \"" + sample.pair_id + "\" is already context-free");
  ComposedSample out = sample;
  out.context_text.clear();
  out.n_contexts = 0;
  out.relevant_index = 0;
  out.component_ids.clear();
  out.context_free = true;
  return out;
}

PromptLayout prompt_layout_from_json(const Json& j) {
  PromptLayout l;
  if (!j.is_object()) return l;
  l.context_prefix = j.value("context_prefix", l.context_prefix);
  l.separator = j.value("separator", l.separator);
  l.instruction_prefix = j.value("instruction_prefix", l.instruction_prefix);
  return l;
}

Json to_json(const PromptLayout& l) {
  return Json{{"context_prefix", l.context_prefix},
              {"separator", l.separator},
              {"instruction_prefix", l.instruction_prefix}};
}

TrainingRecord assemble_prompt(const ComposedSample& sample, const PromptLayout& layout) {
  TrainingRecord r;
  r.id = sample.pair_id;
  r.answer = sample.answer;
  if (sample.context_free) {
    r.prompt = layout.instruction_prefix + sample.instruction;
  } else {
    r.prompt = layout.context_prefix + sample.context_text + layout.separator + layout.instruction_prefix +
               sample.instruction;
  }
  return r;
}

namespace {

double quantile(const std::vector<std::size_t>& sorted, double q) {
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return static_cast<double>(sorted[lo]) + frac * (static_cast<double>(sorted[hi]) - static_cast<double>(sorted[lo]));
}

}  // namespace

LengthDistribution summarize_lengths(std::vector<std::size_t> counts) {
  if (counts.empty()) throw Error("length statistics need at least one record");
  LengthDistribution d;
  d.counts = counts;
  std::sort(counts.begin(), counts.end());
  d.min = static_cast<double>(counts.front());
  d.max = static_cast<double>(counts.back());
  d.p25 = quantile(counts, 0.25);
  d.median = quantile(counts, 0.5);
  d.p75 = quantile(counts, 0.75);
  long double sum = std::accumulate(counts.begin(), counts.end(), 0.0L);
  d.mean = static_cast<double>(sum / static_cast<long double>(counts.size()));
  return d;
}

LengthDistribution length_stats(std::span<const TrainingRecord> records, const TokenCounter& counter) {
  std::vector<std::size_t> counts;
  counts.reserve(records.size());
  for (const auto& r : records) counts.push_back(r.prompt_tokens.value_or(counter.count(r.prompt)));
  return summarize_lengths(std::move(counts));
}

Json to_json(const LengthDistribution& d, bool include_counts) {
  Json j{{"n", d.counts.size()}, {"min", d.min},       {"p25", d.p25}, {"median", d.median},
         {"p75", d.p75},         {"max", d.max},       {"mean", d.mean}};
  if (include_counts) j["counts"] = d.counts;
  return j;
}

}  // namespace ctxsynth
