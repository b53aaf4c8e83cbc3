#include "ctxsynth/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

namespace fs = std::filesystem;

bool is_header_record(const Json& j) { return j.is_object() && j.contains(kHeaderKey); }

std::vector<JsonLine> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file", path.string());
  std::vector<JsonLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw InputError(std::string("malformed JSON record: ") + e.what(), path.string(), lineno);
    }
    if (!j.is_object()) throw InputError("record is not a JSON object", path.string(), lineno);
    if (is_header_record(j)) continue;
    out.push_back({lineno, std::move(j)});
  }
  return out;
}

Json read_jsonl_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file", path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (is_header_record(j)) return j.at(kHeaderKey);
    return nullptr;
  }
  return nullptr;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_lines_atomic(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  write_text_atomic(path, text);
}

void write_jsonl_atomic(const fs::path& path, const Json& header, const std::vector<Json>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size() + 1);
  if (!header.is_null()) lines.push_back(Json{{kHeaderKey, header}}.dump());
  for (const auto& r : records) lines.push_back(r.dump());
  write_lines_atomic(path, lines);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ctxsynth
