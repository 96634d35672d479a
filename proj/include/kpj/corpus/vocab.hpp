#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kpj::corpus {

/// Token <-> id map. Ids 0..5 are reserved and fixed:
///   0 <pad>, 1 <unk>, 2 <s>, 3 </s>, 4 [CLS], 5 [SEP].
/// Remaining ids follow descending frequency, ties by first occurrence.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kCls = 4;
  static constexpr std::size_t kSep = 5;
  static constexpr std::size_t kReservedCount = 6;
  static const std::array<std::string_view, kReservedCount> kReserved;

  Vocabulary();

  /// Rebuilds from an id-ordered token list; the reserved prefix must match.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// Id of `token`, or kUnk.
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

  /// FNV-1a over the id-ordered token list.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Frequency counter that remembers first-occurrence order.
class VocabularyBuilder {
 public:
  void count(std::span<const std::string> tokens);
  /// Keeps at most `max_size` non-reserved tokens.
  Vocabulary build(std::size_t max_size) const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::size_t> counts_;
};

}  // namespace kpj::corpus
