#include "ctxsynth/packing.hpp"

#include <algorithm>
#include <numeric>

#include "ctxsynth/error.hpp"

namespace ctxsynth {

void to_json(Json& j, const TrainingRecord& r) {
  j = Json{{"id", r.id}, {"prompt", r.prompt}, {"answer", r.answer}};
  if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
  if (r.answer_tokens) j["answer_tokens"] = *r.answer_tokens;
}

void from_json(const Json& j, TrainingRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.prompt_tokens.reset();
  r.answer_tokens.reset();
  if (j.contains("prompt_tokens")) r.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
  if (j.contains("answer_tokens")) r.answer_tokens = j.at("answer_tokens").get<std::size_t>();
}

void to_json(Json& j, const PackedSequence& p) {
  Json segs = Json::array();
  for (const auto& s : p.segments) {
    segs.push_back({{"record_id", s.record_id},
                    {"offset", s.offset},
                    {"prompt_tokens", s.prompt_tokens},
                    {"answer_tokens", s.answer_tokens},
                    {"loss_weight", s.loss_weight}});
  }
  j = Json{{"segments", segs}, {"total_tokens", p.total_tokens}, {"max_len", p.max_len}};
}

PackResult pack(std::span<const TrainingRecord> records, std::size_t max_len, const TokenCounter& counter) {
  if (max_len == 0) throw Error("max_len must be positive");

  std::vector<PackedSegment> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    PackedSegment s;
    s.record_id = r.id;
    s.prompt_tokens = r.prompt_tokens.value_or(counter.count(r.prompt));
    s.answer_tokens = r.answer_tokens.value_or(counter.count(r.answer));
    items.push_back(std::move(s));
  }
  std::sort(items.begin(), items.end(), [](const PackedSegment& a, const PackedSegment& b) {
    if (a.tokens() != b.tokens()) return a.tokens() > b.tokens();
    return a.record_id < b.record_id;
  });

  PackResult result;
  for (auto& item : items) {
    if (item.tokens() > max_len) {
      result.oversize.push_back({item.record_id, item.tokens()});
      continue;
    }
    auto fit = std::find_if(result.packs.begin(), result.packs.end(), [&](const PackedSequence& p) {
      return p.total_tokens + item.tokens() <= max_len;
    });
    if (fit == result.packs.end()) {
      result.packs.push_back(PackedSequence{{}, 0, max_len});
      fit = std::prev(result.packs.end());
    }
    item.offset = fit->total_tokens;
    fit->total_tokens += item.tokens();
    fit->segments.push_back(std::move(item));
  }
  if (result.packs.empty() && !records.empty()) {
    throw Error("all " + std::to_string(records.size()) + " records exceed max_len " + std::to_string(max_len));
  }
  return result;
}

void loss_weights(std::vector<PackedSequence>& packs) {
  std::size_t k = 0;
  for (const auto& p : packs) k += p.segments.size();
  for (auto& p : packs) {
    for (auto& s : p.segments) {
      if (s.answer_tokens == 0) throw Error("record \"" + s.record_id + "\" has no answer tokens");
      s.loss_weight = 1.0 / (static_cast<double>(k) * static_cast<double>(s.answer_tokens));
    }
  }
}

}  // namespace ctxsynth
