#include "ctxsynth/tokens.hpp"

#include "ctxsynth/error.hpp"
#include "ctxsynth/text.hpp"

namespace ctxsynth {

std::size_t WhitespaceCounter::count(std::string_view text) const { return word_count(text); }

std::size_t CharApproxCounter::count(std::string_view text) const { return (utf8_length(text) + 3) / 4; }

std::shared_ptr<const TokenCounter> make_counter(std::string_view name) {
  if (name == "whitespace" || name.empty()) return std::make_shared<WhitespaceCounter>();
  if (name == "chars4") return std::make_shared<CharApproxCounter>();
  throw ConfigError("unknown token counter \"" + std::string(name) + "\"");
}

}  // namespace ctxsynth
