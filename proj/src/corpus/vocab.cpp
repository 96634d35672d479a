#include "kpj/corpus/vocab.hpp"

#include <algorithm>
#include <numeric>

#include "kpj/core/errors.hpp"

namespace kpj::corpus {

const std::array<std::string_view, Vocabulary::kReservedCount> Vocabulary::kReserved = {
    "<pad>", "<unk>", "<s>", "</s>", "[CLS]", "[SEP]"};

Vocabulary::Vocabulary() {
  for (auto t : kReserved) add(std::string(t));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount) throw FormatError("vocabulary is shorter than its reserved prefix");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != kReserved[i]) {
      throw FormatError("vocabulary reserved id " + std::to_string(i) + " is '" + tokens[i] +
                        "', expected '" + std::string(kReserved[i]) + "'");
    }
  }
  Vocabulary v;
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw FormatError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(std::move(tokens[i]));
  }
  return v;
}

void Vocabulary::add(std::string token) {
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw ContractError("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;  // separator
    h *= 1099511628211ULL;
  }
  return h;
}

void VocabularyBuilder::count(std::span<const std::string> tokens) {
  for (const auto& t : tokens) {
    auto [it, inserted] = counts_.emplace(t, 0);
    if (inserted) order_.push_back(t);
    ++it->second;
  }
}

Vocabulary VocabularyBuilder::build(std::size_t max_size) const {
  std::vector<std::size_t> idx(order_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return counts_.at(order_[a]) > counts_.at(order_[b]);
  });
  std::vector<std::string> tokens(Vocabulary::kReserved.begin(), Vocabulary::kReserved.end());
  Vocabulary reserved;
  for (std::size_t i : idx) {
    if (tokens.size() - Vocabulary::kReservedCount >= max_size) break;
    if (reserved.contains(order_[i])) continue;
    tokens.push_back(order_[i]);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

}  // namespace kpj::corpus
