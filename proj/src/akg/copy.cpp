#include "kpj/akg/copy.hpp"

#include <numeric>

#include "kpj/core/errors.hpp"
#include "kpj/core/ops.hpp"

namespace kpj::akg {

ExtendedVocabMap ExtendedVocabMap::build(std::span<const std::string> source, const Vocabulary& vocab) {
  ExtendedVocabMap map;
  map.base_size_ = vocab.size();
  map.source_ids_.reserve(source.size());
  for (const auto& tok : source) {
    if (vocab.contains(tok)) {
      map.source_ids_.push_back(vocab.id(tok));
      continue;
    }
    auto [it, inserted] = map.oov_ids_.emplace(tok, map.base_size_ + map.oov_.size());
    if (inserted) map.oov_.push_back(tok);
    map.source_ids_.push_back(it->second);
  }
  return map;
}

std::size_t ExtendedVocabMap::ext_id(const std::string& token, const Vocabulary& vocab) const {
  if (vocab.contains(token)) return vocab.id(token);
  auto it = oov_ids_.find(token);
  return it == oov_ids_.end() ? Vocabulary::kUnk : it->second;
}

std::string ExtendedVocabMap::surface(std::size_t ext_id, const Vocabulary& vocab) const {
  if (ext_id < base_size_) return vocab.token(ext_id);
  if (ext_id - base_size_ < oov_.size()) return oov_[ext_id - base_size_];
  throw ContractError("extended id " + std::to_string(ext_id) + " out of range");
}

Tensor mix_copy_distribution(const Tensor& p_gen, const Tensor& p_vocab, const Tensor& attention,
                             const ExtendedVocabMap& map) {
  if (p_vocab.cols() != map.base_size()) {
    throw DimensionError("vocabulary distribution has " + std::to_string(p_vocab.cols()) +
                         " entries, map expects " + std::to_string(map.base_size()));
  }
  if (attention.cols() != map.source_length()) {
    throw DimensionError("copy attention covers " + std::to_string(attention.cols()) +
                         " positions, source has " + std::to_string(map.source_length()));
  }
  std::vector<std::size_t> identity(map.base_size());
  std::iota(identity.begin(), identity.end(), 0);
  const Tensor generated = ad::scatter_cols(p_vocab, identity, map.size());
  const Tensor copied = ad::scatter_cols(attention, map.source_ids(), map.size());
  return ad::add(ad::mul_col(generated, p_gen), ad::mul_col(copied, ad::affine(p_gen, -1.0, 1.0)));
}

}  // namespace kpj::akg
