#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kpj/core/ops.hpp"
#include "kpj/core/params.hpp"

namespace kpj::nn {

using ad::ParamStore;
using ad::Tensor;

/// Training switches threaded through every forward pass.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Tensor drop(const Tensor& x) const { return training ? ad::dropout(x, dropout, rng) : x; }
};

/// Boolean attention mask, row-major [queries, keys]; 1 = may attend.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  static AttentionMask causal(std::size_t n);
  static AttentionMask all(std::size_t rows, std::size_t cols);
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
         bool bias = true);
  Tensor operator()(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out], undefined when disabled
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, std::size_t width);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor gain_;
  Tensor shift_;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore& store, const std::string& name, std::size_t width, std::size_t inner);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;

 private:
  Linear in_;
  Linear out_;
};

struct AttentionOutput {
  Tensor output;                    // [q, d_model]
  std::vector<Tensor> head_weights;  // A tensors of [q, k], rows sum to one
};

/// Scaled dot-product attention over `heads` heads. Key/value inputs may
/// be narrower or wider than the model width; they are projected to it.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, std::size_t d_model,
                     std::size_t heads, std::size_t kv_width = 0);

  AttentionOutput operator()(const Tensor& query, const Tensor& key, const Tensor& value,
                             const AttentionMask* mask = nullptr) const;

  std::size_t heads() const { return heads_; }
  std::size_t width() const { return d_model_; }

 private:
  std::size_t d_model_ = 0;
  std::size_t heads_ = 0;
  Linear q_, k_, v_, o_;
};

/// Stacks per-head weights into a [A, q, k] tensor for inspection.
Tensor stack_heads(std::span<const Tensor> head_weights);

/// Post-norm block: x <- LN(x + Attn(x, M, M)); x <- LN(x + FFN(x)). With no
/// memory the block is a plain self-attention encoder layer; with a memory
/// it attends from x into it (the fusion layers).
class TransformerEncoderBlock {
 public:
  TransformerEncoderBlock() = default;
  TransformerEncoderBlock(ParamStore& store, const std::string& name, std::size_t d_model,
                          std::size_t heads, std::size_t ff_inner, std::size_t memory_width = 0);

  Tensor operator()(const Tensor& x, const ForwardContext& ctx,
                    const AttentionMask* mask = nullptr) const;
  Tensor attend(const Tensor& x, const Tensor& memory, const ForwardContext& ctx) const;

 private:
  MultiHeadAttention attn_;
  LayerNorm norm1_;
  FeedForward ffn_;
  LayerNorm norm2_;
};

struct DecoderOutput {
  Tensor output;                          // [t, d]
  std::vector<Tensor> cross_head_weights;  // A x [t, n]
};

/// Causal self-attention, cross-attention into the encoder states, FFN;
/// each sub-layer wrapped in residual + layer norm.
class TransformerDecoderBlock {
 public:
  TransformerDecoderBlock() = default;
  TransformerDecoderBlock(ParamStore& store, const std::string& name, std::size_t d_model,
                          std::size_t heads, std::size_t ff_inner);

  DecoderOutput operator()(const Tensor& x, const Tensor& encoded, const ForwardContext& ctx) const;

 private:
  MultiHeadAttention self_attn_;
  LayerNorm norm1_;
  MultiHeadAttention cross_attn_;
  LayerNorm norm2_;
  FeedForward ffn_;
  LayerNorm norm3_;
};

class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden);

  /// Runs the cell over rows of `x` in the given order; returns one hidden
  /// state row per input row, in input order.
  Tensor scan(const Tensor& x, bool reverse) const;
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t hidden_ = 0;
  Tensor input_weight_;   // [in, 4h], gate order i f o g
  Tensor hidden_weight_;  // [h, 4h]
  Tensor bias_;           // [4h]
};

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden);

  /// [n, in] -> [n, 2h]; forward states first, backward states second.
  Tensor operator()(const Tensor& x) const;
  std::size_t output_width() const { return 2 * forward_.hidden(); }

 private:
  LstmCell forward_;
  LstmCell backward_;
};

/// Sinusoidal position table [n, d].
Tensor sinusoidal_positions(std::size_t n, std::size_t d);

/// Row lookup of `ids` in `table`; adds sinusoidal positions when asked.
Tensor embed(std::span<const std::size_t> ids, const Tensor& table, bool positional);

}  // namespace kpj::nn
