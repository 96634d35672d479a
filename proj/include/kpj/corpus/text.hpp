#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kpj::corpus {

using Tokens = std::vector<std::string>;

inline constexpr std::string_view kDigitToken = "<digit>";

/// Half-open token range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

/// Lowercases, splits on whitespace, keeps every punctuation character as
/// its own token and replaces each maximal digit run with `<digit>`.
/// Bytes >= 0x80 are treated as word characters.
Tokens normalize(std::string_view text);

/// Space-joined tokens; normalize(join(normalize(t))) == normalize(t).
std::string join(std::span<const std::string> tokens);

bool is_sentence_terminator(std::string_view token);

/// Splits after each of . ! ? ; tokens. A trailing run without a terminator
/// still forms a sentence; no span is empty.
std::vector<Span> split_sentences(std::span<const std::string> tokens);

}  // namespace kpj::corpus
