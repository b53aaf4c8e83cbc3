#include "ctxsynth/config.hpp"

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

namespace {

template <typename T>
void read(const Json& obj, const char* key, T& dst) {
  if (obj.contains(key) && !obj.at(key).is_null()) dst = obj.at(key).get<T>();
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config section \"") + key + "\" must be an object");
  return j.at(key);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  try {
    if (j.contains("engines")) {
      c.engines = j.at("engines");
      if (!c.engines.is_object()) throw ConfigError("\"engines\" must be an object keyed by engine id");
      for (const auto& [id, entry] : c.engines.items()) {
        for (const char* forbidden : {"api_key", "credential", "token", "key"}) {
          if (entry.contains(forbidden)) {
            throw ConfigError("engine \"" + id + "\": plaintext credential field \"" + forbidden +
                              "\" is not allowed; use credential_env");
          }
        }
      }
    }
    c.fields = field_mapping_from_json(section(j, "fields"));

    const Json& paths = section(j, "paths");
    read(paths, "pairs", c.paths.pairs);
    read(paths, "haystack", c.paths.haystack);
    read(paths, "contexts", c.paths.contexts);
    read(paths, "output_dir", c.paths.output_dir);

    const Json& syn = section(j, "synthesis");
    read(syn, "engine", c.synthesis.engine);
    read(syn, "target_words", c.synthesis.target_words);
    read(syn, "mode", c.synthesis.mode);
    read(syn, "max_in_flight", c.synthesis.max_in_flight);
    read(syn, "seed", c.synthesis.seed);
    if (syn.contains("n_per_task") && !syn.at("n_per_task").is_null()) {
      c.synthesis.n_per_task = syn.at("n_per_task").get<std::size_t>();
    }

    const Json& comp = section(j, "composition");
    read(comp, "n", c.composition.n);
    if (comp.contains("preset")) c.composition.n = concatenation_preset(comp.at("preset").get<std::string>());
    read(comp, "seed", c.composition.seed);
    read(comp, "same_task_only", c.composition.same_task_only);
    if (comp.contains("layout")) c.composition.layout = prompt_layout_from_json(comp.at("layout"));

    const Json& niah = section(j, "niah");
    if (niah.contains("variant")) {
      c.niah.config.variant = niah_variant_from_string(niah.at("variant").get<std::string>());
    }
    read(niah, "target_tokens", c.niah.config.target_tokens);
    read(niah, "n_keys", c.niah.config.n_keys);
    read(niah, "n_queries", c.niah.config.n_queries);
    read(niah, "n_values", c.niah.config.n_values);
    read(niah, "depths", c.niah.config.depths);
    read(niah, "seed", c.niah.config.seed);
    read(niah, "allow_repeat", c.niah.config.allow_repeat);
    read(niah, "preset", c.niah.preset);
    read(niah, "per_subtask", c.niah.per_subtask);
    read(niah, "count", c.niah.count);
    read(niah, "lengths", c.niah.lengths);
    read(niah, "n_per_length", c.niah.n_per_length);
    read(niah, "counter", c.niah.counter);

    const Json& pack = section(j, "packing");
    read(pack, "max_len", c.packing.max_len);
    if (pack.contains("preset")) c.packing.max_len = max_len_preset(pack.at("preset").get<std::string>());
    read(pack, "counter", c.packing.counter);

    const Json& sc = section(j, "scoring");
    read(sc, "metric", c.scoring.metric);
    read(sc, "task", c.scoring.task);
    read(sc, "gap_threshold", c.scoring.gap_threshold);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return from_json(j);
}

std::size_t concatenation_preset(std::string_view name) {
  std::string n = to_lower_ascii(name);
  if (n == "n1" || n == "1") return 1;
  if (n == "n5" || n == "5") return 5;
  if (n == "n10" || n == "10") return 10;
  throw ConfigError("unknown concatenation preset \"" + std::string(name) + "\" (expected n1, n5 or n10)");
}

std::size_t max_len_preset(std::string_view name) {
  std::string n = to_lower_ascii(name);
  if (n == "32k") return kMaxLen32k;
  if (n == "64k") return kMaxLen64k;
  throw ConfigError("unknown max_len preset \"" + std::string(name) + "\" (expected 32k or 64k)");
}

}  // namespace ctxsynth
