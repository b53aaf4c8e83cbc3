#pragma once

// Fixtures, temporary directories and independent reference implementations
// shared by the unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "ctxsynth/corpus.hpp"
#include "ctxsynth/jsonl.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(CTXSYNTH_TEST_DATA); }

inline std::string read_file(const fs::path& p) { return ctxsynth::read_text_file(p); }

/// Golden file contents without the trailing newline editors add.
inline std::string golden(const std::string& name) {
  std::string s = read_file(data_dir() / "golden" / name);
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

inline std::vector<std::string> golden_lines(const std::string& name) {
  std::vector<std::string> out;
  std::istringstream in(golden(name));
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

inline std::string substitute(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("ctxsynth-" + tag + "-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, std::string_view text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Filler corpus of plain sentences, large enough for 64k-token haystacks.
inline ctxsynth::HaystackCorpus synthetic_corpus(std::size_t n_docs, std::size_t words_per_doc,
                                                 std::uint64_t seed) {
  static const char* kWords[] = {
      "river", "stone", "market", "winter", "letter", "garden", "harbor", "lamp",   "field",  "engine",
      "window", "morning", "road",  "teacher", "bread", "signal", "island", "valley", "copper", "paper",
      "the",   "a",      "of",     "and",    "to",     "in",     "was",    "with",   "for",    "near",
      "quiet", "early",  "old",    "narrow", "bright", "heavy",  "small",  "distant", "warm",  "slow",
      "walked", "carried", "found", "opened", "watched", "built", "kept",   "sold",   "mended", "crossed"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, std::size(kWords) - 1);
  std::uniform_int_distribution<int> sentence_len(5, 18);
  ctxsynth::HaystackCorpus corpus;
  for (std::size_t d = 0; d < n_docs; ++d) {
    std::string text;
    std::size_t words = 0;
    while (words < words_per_doc) {
      int len = sentence_len(rng);
      for (int i = 0; i < len; ++i) {
        std::string w = kWords[word(rng)];
        if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        if (!text.empty()) text += ' ';
        text += w;
      }
      text += '.';
      words += len;
    }
    corpus.total_words += words;
    corpus.documents.push_back({"synthetic-" + std::to_string(d), std::move(text)});
  }
  return corpus;
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline bool is_subsequence(const std::vector<std::string>& sub, const std::vector<std::string>& seq) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < seq.size() && j < sub.size(); ++i) {
    if (seq[i] == sub[j]) ++j;
  }
  return j == sub.size();
}

/// LCS length by enumerating every subsequence of the shorter sequence.
/// Exponential; for sequences of at most ~16 tokens.
inline std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  const std::size_t n = shorter.size();
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::size_t bits = static_cast<std::size_t>(__builtin_popcount(mask));
    if (bits <= best) continue;
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) sub.push_back(shorter[i]);
    }
    if (is_subsequence(sub, longer)) best = bits;
  }
  return best;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline double rouge_l_oracle(std::string_view pred, std::string_view gold) {
  auto p = split_words(lower(std::string(pred)));
  auto g = split_words(lower(std::string(gold)));
  if (p.empty() || g.empty()) return 0.0;
  double lcs = static_cast<double>(brute_force_lcs(p, g));
  if (lcs == 0) return 0.0;
  double prec = lcs / static_cast<double>(p.size());
  double rec = lcs / static_cast<double>(g.size());
  return 2 * prec * rec / (prec + rec);
}

/// Minimum number of bins of capacity `cap` holding `sizes`, by exhaustive
/// search over assignments (items placed largest first, empty bins tried once).
inline std::size_t brute_force_bins(std::vector<std::size_t> sizes, std::size_t cap) {
  std::sort(sizes.rbegin(), sizes.rend());
  std::size_t best = sizes.size();
  std::vector<std::size_t> load;
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (load.size() >= best) return;
    if (i == sizes.size()) {
      best = load.size();
      return;
    }
    for (std::size_t b = 0; b < load.size(); ++b) {
      if (load[b] + sizes[i] <= cap) {
        load[b] += sizes[i];
        self(self, i + 1);
        load[b] -= sizes[i];
      }
    }
    load.push_back(sizes[i]);
    self(self, i + 1);
    load.pop_back();
  };
  rec(rec, 0);
  return best;
}

/// Upper-tail p-value of Pearson's chi-square statistic against a uniform
/// distribution over the histogram's bins.
inline double chi_square_uniform_p(const std::vector<std::size_t>& histogram) {
  double total = 0;
  for (auto h : histogram) total += static_cast<double>(h);
  double expected = total / static_cast<double>(histogram.size());
  double stat = 0;
  for (auto h : histogram) stat += (static_cast<double>(h) - expected) * (static_cast<double>(h) - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(histogram.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace testsupport
