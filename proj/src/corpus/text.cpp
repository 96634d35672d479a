#include "kpj/corpus/text.hpp"

#include <cctype>

namespace kpj::corpus {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_word(unsigned char c) { return std::isalpha(c) || c >= 0x80 || c == '_'; }

}  // namespace

Tokens normalize(std::string_view text) {
  Tokens out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      flush();
      ++i;
    } else if (c == '<' && text.substr(i, kDigitToken.size()) == kDigitToken) {
      flush();
      out.emplace_back(kDigitToken);
      i += kDigitToken.size();
    } else if (is_digit(c)) {
      flush();
      while (i < text.size() && is_digit(static_cast<unsigned char>(text[i]))) ++i;
      out.emplace_back(kDigitToken);
    } else if (is_word(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
      ++i;
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  flush();
  return out;
}

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

bool is_sentence_terminator(std::string_view token) {
  return token == "." || token == "!" || token == "?" || token == ";";
}

std::vector<Span> split_sentences(std::span<const std::string> tokens) {
  std::vector<Span> spans;
  std::size_t start = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_sentence_terminator(tokens[i])) {
      spans.push_back({start, i + 1});
      start = i + 1;
    }
  }
  if (start < tokens.size()) spans.push_back({start, tokens.size()});
  return spans;
}

}  // namespace kpj::corpus
