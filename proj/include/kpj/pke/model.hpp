#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kpj/core/optim.hpp"
#include "kpj/core/params.hpp"
#include "kpj/corpus/corpus.hpp"
#include "kpj/nn/layers.hpp"

namespace kpj::pke {

using ad::Tensor;
using corpus::Example;
using corpus::Span;
using corpus::Vocabulary;
using nn::ForwardContext;

struct SharedEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_inner = 0;  // 0 = 4 x width
  std::size_t max_len = corpus::kDefaultMaxLen;
};

/// Document encoder shared by extraction and generation (stand-in for a
/// pre-trained encoder). Token, learned position and sentence-segment
/// embeddings feed a stack of self-attention blocks. Parameters live under
/// the "encoder." prefix.
class SharedEncoder {
 public:
  SharedEncoder(const SharedEncoderConfig& config, std::uint64_t seed);
  SharedEncoder(SharedEncoder&&) noexcept = default;
  SharedEncoder& operator=(SharedEncoder&&) noexcept = default;

  Tensor operator()(std::span<const std::size_t> ids, std::span<const std::size_t> segments,
                    const ForwardContext& ctx) const;

  const SharedEncoderConfig& config() const { return config_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

 private:
  SharedEncoderConfig config_;
  ad::ParamStore store_;
  Tensor tokens_;
  Tensor positions_;
  Tensor segments_;
  nn::LayerNorm embed_norm_;
  std::vector<nn::TransformerEncoderBlock> blocks_;
};

/// Encoder input with [CLS] before and [SEP] after each sentence.
struct MarkedDocument {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> segments;       // alternating 0 / 1 per sentence
  std::vector<std::size_t> cls_positions;  // one per kept sentence
  std::vector<std::size_t> alignment;      // token index -> marked position
  std::size_t kept_sentences = 0;
  std::size_t kept_tokens = 0;
};

/// Inserts markers around each sentence; trailing sentences that would push
/// the sequence past `max_len` are dropped. Throws on an empty document.
MarkedDocument mark_sentences(std::span<const std::size_t> token_ids, std::span<const Span> sentences,
                              std::size_t max_len);

struct EncodedDocument {
  MarkedDocument marked;
  Tensor states;       // H, [n', width]
  Tensor cls_vectors;  // [kept sentences, width]
};

struct PkeConfig {
  SharedEncoderConfig encoder;
  std::size_t filter_heads = 4;
  std::size_t lstm_hidden = 32;
  std::size_t top_k = 7;
  bool filter_enabled = true;
  bool use_crf = true;
  bool one_sided_filter = false;
  double dropout = 0.1;
};

/// Sentence filter loss. Default: mean binary cross-entropy. `strict` uses
/// the one-sided -sum(y log s). Logs are clamped at 1e-12.
Tensor filter_loss(const Tensor& scores, std::span<const std::uint8_t> labels, bool strict = false);

/// Indices of the K highest scores (earlier wins ties), ascending.
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k);

struct PkePrediction {
  std::vector<std::size_t> selected;      // kept-sentence indices, ascending
  std::vector<double> sentence_scores;    // one per kept sentence
  std::vector<corpus::Tag> tags;          // one per document token
  std::vector<corpus::ExtractedPhrase> phrases;  // document order
};

class PkeModel {
 public:
  PkeModel(const PkeConfig& config, std::uint64_t seed);
  PkeModel(PkeModel&&) noexcept = default;
  PkeModel& operator=(PkeModel&&) noexcept = default;

  const PkeConfig& config() const { return config_; }
  SharedEncoder& encoder() { return encoder_; }
  const SharedEncoder& encoder() const { return encoder_; }
  ad::ParamStore& head_params() { return heads_; }
  const ad::ParamStore& head_params() const { return heads_; }
  /// Encoder and head parameters, encoder first.
  ad::NamedParams all_params() const;

  EncodedDocument encode_with_cls(std::span<const std::size_t> token_ids, std::span<const Span> sentences,
                                  const ForwardContext& ctx) const;
  /// sigmoid(w . G^2) per sentence, [L_s, 1].
  Tensor score_sentences(const Tensor& cls_vectors, const ForwardContext& ctx) const;
  /// BiLSTM then projection to tag scores, [n, 3].
  Tensor emissions(const Tensor& token_states) const;
  const Tensor& transitions() const { return transitions_; }

  /// L_f over every kept sentence plus L_c over the tokens of gold-positive
  /// sentences (concatenated).
  Tensor loss(const Example& example, const Vocabulary& vocab, const ForwardContext& ctx) const;

  /// Filter, select, tag each selected sentence on its own, extract spans.
  PkePrediction predict(const Example& example, const Vocabulary& vocab,
                        std::optional<std::size_t> k = std::nullopt) const;

 private:
  std::vector<std::size_t> decode_tags(const Tensor& emissions) const;

  PkeConfig config_;
  SharedEncoder encoder_;
  ad::ParamStore heads_;
  std::vector<nn::TransformerEncoderBlock> filter_blocks_;
  Tensor filter_weight_;  // [width, 1]
  nn::BiLstm lstm_;
  nn::Linear projection_;
  Tensor transitions_;  // [5, 5]
};

}  // namespace kpj::pke
