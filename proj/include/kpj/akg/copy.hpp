#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kpj/core/tensor.hpp"
#include "kpj/corpus/vocab.hpp"

namespace kpj::akg {

using ad::Tensor;
using corpus::Vocabulary;

/// Per-document union of the generator vocabulary and the document's
/// out-of-vocabulary tokens. In-vocabulary tokens keep their base id; each
/// distinct OOV source token gets the next id after the base vocabulary.
class ExtendedVocabMap {
 public:
  ExtendedVocabMap() = default;
  static ExtendedVocabMap build(std::span<const std::string> source, const Vocabulary& vocab);

  std::size_t base_size() const { return base_size_; }
  std::size_t size() const { return base_size_ + oov_.size(); }
  std::size_t source_length() const { return source_ids_.size(); }
  /// Extended id of every source position.
  const std::vector<std::size_t>& source_ids() const { return source_ids_; }
  const std::vector<std::string>& oov_tokens() const { return oov_; }

  /// Base id when in vocabulary, copy id when it occurs in the source,
  /// otherwise <unk>.
  std::size_t ext_id(const std::string& token, const Vocabulary& vocab) const;
  /// Decoder input id: copy ids fold back to <unk>.
  std::size_t input_id(std::size_t ext_id) const { return ext_id < base_size_ ? ext_id : Vocabulary::kUnk; }
  std::string surface(std::size_t ext_id, const Vocabulary& vocab) const;

 private:
  std::size_t base_size_ = 0;
  std::vector<std::size_t> source_ids_;
  std::vector<std::string> oov_;
  std::unordered_map<std::string, std::size_t> oov_ids_;
};

/// P = p_gen * P_vocab + (1 - p_gen) * sum_{i: src_i = w} attn[i], row by
/// row. `p_gen` is [t, 1], `p_vocab` [t, base], `attention` [t, n]; the
/// result is [t, extended size].
Tensor mix_copy_distribution(const Tensor& p_gen, const Tensor& p_vocab, const Tensor& attention,
                             const ExtendedVocabMap& map);

}  // namespace kpj::akg
