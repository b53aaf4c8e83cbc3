#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctxsynth/composition.hpp"
#include "ctxsynth/corpus.hpp"
#include "ctxsynth/niah.hpp"

namespace ctxsynth {

/// Whole-pipeline configuration, loaded from one JSON document. Command line
/// flags override individual fields after loading.
struct PipelineConfig {
  /// Engine table: id -> {type: "http"|"mock", endpoint, model, credential_env, ...}.
  /// Defaults to a single offline engine named "mock".
  Json engines = Json{{"mock", {{"type", "mock"}}}};
  FieldMapping fields;

  struct Paths {
    std::string pairs;
    std::string haystack;
    std::string contexts;
    std::string output_dir = "out";
  } paths;

  struct Synthesis {
    std::string engine = "mock";
    std::size_t target_words = 2000;
    /// generic | summary | multi_hop | single_hop | task (per-task template)
    std::string mode = "generic";
    std::size_t max_in_flight = 4;
    std::optional<std::size_t> n_per_task;
    std::uint64_t seed = 0;
  } synthesis;

  struct Composition {
    std::size_t n = kDefaultConcatenation;
    std::uint64_t seed = 0;
    bool same_task_only = false;
    PromptLayout layout;
  } composition;

  struct Niah {
    NiahConfig config;
    /// SFT2 | SFT3 | SFT4, or empty for a custom configuration.
    std::string preset;
    std::size_t per_subtask = 200;
    std::size_t count = 1;
    std::vector<std::size_t> lengths;
    std::size_t n_per_length = 1;
    std::string counter = "whitespace";
  } niah;

  struct Packing {
    std::size_t max_len = 65536;
    std::string counter = "whitespace";
  } packing;

  struct Scoring {
    std::string metric = "f1";
    std::string task;  // overrides the gold file's task field when set
    double gap_threshold = 1.0;
  } scoring;

  static PipelineConfig from_json(const Json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

/// Concatenation presets: "n1", "n5", "n10".
std::size_t concatenation_preset(std::string_view name);
/// Maximum sequence length presets: "32k" -> 32768, "64k" -> 65536.
std::size_t max_len_preset(std::string_view name);

}  // namespace ctxsynth
