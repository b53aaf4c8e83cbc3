#include "ctxsynth/corpus.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <unordered_set>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

namespace fs = std::filesystem;

void to_json(Json& j, const InstructionPair& p) {
  j = Json{{"id", p.id},
           {"task", p.task},
           {"instruction", p.instruction},
           {"answer", p.answer},
           {"requires_context", p.requires_context}};
  if (p.source_context) j["source_context"] = *p.source_context;
}

void from_json(const Json& j, InstructionPair& p) {
  p = pair_from_record(j, FieldMapping{});
}

FieldMapping field_mapping_from_json(const Json& j) {
  FieldMapping m;
  if (!j.is_object()) return m;
  auto get = [&](const char* key, std::string& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::string>();
  };
  get("id", m.id);
  get("task", m.task);
  get("instruction", m.instruction);
  get("answer", m.answer);
  get("source_context", m.source_context);
  get("requires_context", m.requires_context);
  get("default_task", m.default_task);
  return m;
}

namespace {

std::string text_field(const Json& record, const std::string& key, bool required) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) {
    if (required) throw InputError("missing field \"" + key + "\"");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_array() && !it->empty() && it->front().is_string()) return it->front().get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw InputError("field \"" + key + "\" is not text");
}

}  // namespace

InstructionPair pair_from_record(const Json& record, const FieldMapping& fields) {
  InstructionPair p;
  p.id = text_field(record, fields.id, true);
  p.task = text_field(record, fields.task, fields.default_task.empty());
  if (p.task.empty()) p.task = fields.default_task;
  p.instruction = text_field(record, fields.instruction, true);
  p.answer = text_field(record, fields.answer, true);
  if (p.id.empty()) throw InputError("empty id");
  if (trim(p.instruction).empty()) throw InputError("empty instruction");
  if (trim(p.answer).empty()) throw InputError("empty answer");
  if (auto it = record.find(fields.source_context); it != record.end() && !it->is_null()) {
    p.source_context = text_field(record, fields.source_context, true);
  }
  if (auto it = record.find(fields.requires_context); it != record.end()) {
    if (!it->is_boolean()) throw InputError("field \"" + fields.requires_context + "\" is not a boolean");
    p.requires_context = it->get<bool>();
  }
  return p;
}

std::vector<InstructionPair> load_pairs(const fs::path& path, const FieldMapping& fields) {
  std::vector<InstructionPair> out;
  std::unordered_set<std::string> seen;
  for (const auto& line : read_jsonl(path)) {
    InstructionPair p;
    try {
      p = pair_from_record(line.value, fields);
    } catch (const InputError& e) {
      throw InputError(e.what(), path.string(), line.line);
    }
    if (!seen.insert(p.id).second) {
      throw InputError("duplicate id \"" + p.id + "\"", path.string(), line.line);
    }
    out.push_back(std::move(p));
  }
  return out;
}

SampleResult sample_per_task(std::span<const InstructionPair> pairs, std::size_t n_per_task,
                             std::uint64_t seed) {
  SampleResult result;
  std::map<std::string, std::vector<const InstructionPair*>> by_task;
  for (const auto& p : pairs) {
    if (!p.requires_context) {
      ++result.rejected_context_free;
      continue;
    }
    by_task[p.task].push_back(&p);
  }
  for (auto& [task, candidates] : by_task) {
    std::sort(candidates.begin(), candidates.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
    // Seeding on the task name keeps one task's choice independent of which others exist.
    std::mt19937_64 rng(mix_seed(seed, stable_hash64(task)));
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::size_t take = std::min(n_per_task, candidates.size());
    if (take < n_per_task) result.shortfalls.push_back({task, n_per_task, candidates.size()});
    std::vector<const InstructionPair*> chosen(candidates.begin(), candidates.begin() + take);
    std::sort(chosen.begin(), chosen.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    for (const auto* p : chosen) result.selected.push_back(*p);
  }
  return result;
}

HaystackCorpus load_haystack(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("haystack path is not a directory", dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (files.empty()) throw InputError("haystack directory contains no files", dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  HaystackCorpus corpus;
  for (const auto& f : files) {
    std::string text = read_text_file(f);
    if (trim(text).empty()) throw InputError("haystack document is empty", f.string());
    corpus.total_words += word_count(text);
    corpus.documents.push_back({f.filename().string(), std::move(text)});
  }
  return corpus;
}

}  // namespace ctxsynth
