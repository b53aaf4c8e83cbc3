#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctxsynth {

using Json = nlohmann::json;

struct JsonLine {
  std::size_t line = 0;  // 1-based
  Json value;
};

/// Key of the provenance record that leads every file we write.
inline constexpr const char* kHeaderKey = "_header";

bool is_header_record(const Json& j);

/// Reads a line-delimited JSON file. Blank lines and header records are skipped.
/// Throws InputError naming the line on malformed JSON or a non-object record.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

/// Returns the header record of `path`, or null if the file has none.
Json read_jsonl_header(const std::filesystem::path& path);

/// Writes `lines` (one JSON document per line) to `path` through a temporary
/// sibling file and a rename, so readers never observe a partial file.
void write_lines_atomic(const std::filesystem::path& path, const std::vector<std::string>& lines);

void write_jsonl_atomic(const std::filesystem::path& path, const Json& header,
                        const std::vector<Json>& records);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ctxsynth
