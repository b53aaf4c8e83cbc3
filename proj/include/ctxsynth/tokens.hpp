#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace ctxsynth {

/// Pluggable length measure used for length targets, packing and statistics.
/// count("") must be 0.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::string name() const = 0;
  virtual std::size_t count(std::string_view text) const = 0;
};

/// Whitespace-separated words.
class WhitespaceCounter final : public TokenCounter {
 public:
  std::string name() const override { return "whitespace"; }
  std::size_t count(std::string_view text) const override;
};

/// ceil(code points / 4), a rough stand-in for subword tokenizers.
class CharApproxCounter final : public TokenCounter {
 public:
  std::string name() const override { return "chars4"; }
  std::size_t count(std::string_view text) const override;
};

/// "whitespace" or "chars4"; throws ConfigError otherwise.
std::shared_ptr<const TokenCounter> make_counter(std::string_view name);

inline std::size_t count_tokens(std::string_view text, const TokenCounter& counter) {
  return counter.count(text);
}

}  // namespace ctxsynth
