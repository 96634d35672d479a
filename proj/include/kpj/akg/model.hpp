#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpj/akg/beam.hpp"
#include "kpj/akg/copy.hpp"
#include "kpj/core/optim.hpp"
#include "kpj/core/params.hpp"
#include "kpj/corpus/vocab.hpp"
#include "kpj/nn/layers.hpp"

namespace kpj::akg {

using nn::ForwardContext;

struct AkgConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_inner = 0;      // 0 = 4 x width
  std::size_t shared_width = 64;  // width of the shared-encoder states
  bool fusion = true;
  double dropout = 0.1;
  std::size_t beam_depth = 6;
};

struct DecodeOutput {
  Tensor states;          // last decoder layer, [t, width]
  Tensor copy_attention;  // head-averaged cross attention of the last layer, [t, n]
};

/// Transformer pointer-generator with gated fusion attention over frozen
/// shared-encoder states. With fusion disabled no fusion or gate
/// parameters are created and V = U^L.
class AkgModel {
 public:
  AkgModel(const AkgConfig& config, std::uint64_t seed);
  AkgModel(AkgModel&&) noexcept = default;
  AkgModel& operator=(AkgModel&&) noexcept = default;

  const AkgConfig& config() const { return config_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  /// U^L: embeddings plus sinusoidal positions through L encoder blocks.
  Tensor encode_source(std::span<const std::size_t> source_ids, const ForwardContext& ctx) const;

  /// U^hat^l = FFN(Attn(U^hat^{l-1}, H, H)) with U^hat^0 = U^L, then
  /// V = g * U^L + (1 - g) * U^hat^L with g = sigmoid([U^L; U^hat^L] W_u).
  Tensor fuse(const Tensor& encoded, const Tensor& shared_states, const ForwardContext& ctx) const;

  /// V, dispatching on the fusion switch (`shared_states` may be undefined
  /// when fusion is off).
  Tensor memory(std::span<const std::size_t> source_ids, const Tensor& shared_states,
                const ForwardContext& ctx) const;

  /// Causal decoder over `prefix` (base ids, starting with <s>).
  DecodeOutput decode(std::span<const std::size_t> prefix, const Tensor& memory, const ForwardContext& ctx) const;

  /// Row-wise final distribution over the extended vocabulary, [t, ext].
  Tensor output_distribution(const DecodeOutput& decoded, const ExtendedVocabMap& map) const;

  /// Copy switch p_gen = sigmoid(w_d . d_t + b), [t, 1].
  Tensor copy_switch(const Tensor& states) const;
  /// Generator softmax over the base vocabulary, [t, |A|].
  Tensor vocab_distribution(const Tensor& states) const;

  /// -sum_t log P(y_t | y_<t, x) under teacher forcing. `target` holds
  /// extended ids without the trailing EOS, which is appended here.
  Tensor nll(std::span<const std::size_t> target, const Tensor& memory, const ExtendedVocabMap& map,
             const ForwardContext& ctx) const;

  /// Beam search over the extended vocabulary; special tokens other than
  /// EOS are never generated.
  std::vector<RankedPhrase> generate(const Tensor& memory, const ExtendedVocabMap& map,
                                     const corpus::Vocabulary& vocab, const BeamConfig& beam) const;

 private:
  AkgConfig config_;
  ad::ParamStore store_;
  Tensor embedding_;  // shared by source and target side
  std::vector<nn::TransformerEncoderBlock> encoder_blocks_;
  std::vector<nn::TransformerEncoderBlock> fusion_blocks_;
  nn::Linear gate_;
  std::vector<nn::TransformerDecoderBlock> decoder_blocks_;
  nn::Linear vocab_projection_;
  nn::Linear switch_;
};

}  // namespace kpj::akg
