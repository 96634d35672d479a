#include "kpj/nn/layers.hpp"

#include <cmath>

#include "kpj/core/errors.hpp"

namespace kpj::nn {

using ad::Init;

AttentionMask AttentionMask::causal(std::size_t n) {
  AttentionMask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c <= r; ++c) m.allowed[r * n + c] = 1;
  return m;
}

AttentionMask AttentionMask::all(std::size_t rows, std::size_t cols) {
  return AttentionMask{rows, cols, std::vector<std::uint8_t>(rows * cols, 1)};
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
               bool bias)
    : weight_(store.add(name + ".weight", {in, out}, Init::xavier)) {
  if (bias) bias_ = store.add(name + ".bias", {out}, Init::zeros);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = ad::matmul(x, weight_);
  return bias_.defined() ? ad::add_row(y, bias_) : y;
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, std::size_t width)
    : gain_(store.add(name + ".gain", {width}, Init::ones)),
      shift_(store.add(name + ".shift", {width}, Init::zeros)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return ad::layer_norm(x, gain_, shift_); }

FeedForward::FeedForward(ParamStore& store, const std::string& name, std::size_t width,
                         std::size_t inner)
    : in_(store, name + ".in", width, inner), out_(store, name + ".out", inner, width) {}

Tensor FeedForward::operator()(const Tensor& x, const ForwardContext& ctx) const {
  return out_(ctx.drop(ad::gelu(in_(x))));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name,
                                       std::size_t d_model, std::size_t heads,
                                       std::size_t kv_width)
    : d_model_(d_model), heads_(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ContractError("attention width " + std::to_string(d_model) +
                        " is not divisible by head count " + std::to_string(heads));
  }
  const std::size_t kv = kv_width == 0 ? d_model : kv_width;
  q_ = Linear(store, name + ".query", d_model, d_model);
  k_ = Linear(store, name + ".key", kv, d_model);
  v_ = Linear(store, name + ".value", kv, d_model);
  o_ = Linear(store, name + ".output", d_model, d_model);
}

AttentionOutput MultiHeadAttention::operator()(const Tensor& query, const Tensor& key,
                                               const Tensor& value,
                                               const AttentionMask* mask) const {
  if (key.rows() != value.rows()) throw DimensionError("attention: key/value lengths differ");
  if (mask && (mask->rows != query.rows() || mask->cols != key.rows())) {
    throw DimensionError("attention: mask is " + std::to_string(mask->rows) + "x" +
                         std::to_string(mask->cols) + " for " + std::to_string(query.rows()) +
                         " queries and " + std::to_string(key.rows()) + " keys");
  }
  const Tensor q = q_(query);
  const Tensor k = k_(key);
  const Tensor v = v_(value);
  const std::size_t dh = d_model_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionOutput out;
  Tensor merged;
  for (std::size_t h = 0; h < heads_; ++h) {
    const Tensor qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    const Tensor scores = ad::affine(ad::matmul(qh, ad::transpose(kh)), scale, 0.0);
    Tensor weights = mask ? ad::masked_softmax_rows(scores, mask->allowed) : ad::softmax(scores, 1);
    const Tensor ctx = ad::matmul(weights, vh);
    merged = merged.defined() ? ad::concat_cols(merged, ctx) : ctx;
    out.head_weights.push_back(std::move(weights));
  }
  out.output = o_(merged);
  return out;
}

Tensor stack_heads(std::span<const Tensor> head_weights) {
  if (head_weights.empty()) throw ContractError("stack_heads: no heads");
  const std::size_t q = head_weights[0].rows(), k = head_weights[0].cols();
  std::vector<double> data;
  for (const auto& w : head_weights) data.insert(data.end(), w.data().begin(), w.data().end());
  return Tensor({head_weights.size(), q, k}, std::move(data));
}

TransformerEncoderBlock::TransformerEncoderBlock(ParamStore& store, const std::string& name,
                                                 std::size_t d_model, std::size_t heads,
                                                 std::size_t ff_inner, std::size_t memory_width)
    : attn_(store, name + ".attn", d_model, heads, memory_width),
      norm1_(store, name + ".norm1", d_model),
      ffn_(store, name + ".ffn", d_model, ff_inner),
      norm2_(store, name + ".norm2", d_model) {}

Tensor TransformerEncoderBlock::operator()(const Tensor& x, const ForwardContext& ctx,
                                           const AttentionMask* mask) const {
  const Tensor a = attn_(x, x, x, mask).output;
  const Tensor h = norm1_(ad::add(x, ctx.drop(a)));
  return norm2_(ad::add(h, ctx.drop(ffn_(h, ctx))));
}

Tensor TransformerEncoderBlock::attend(const Tensor& x, const Tensor& memory,
                                       const ForwardContext& ctx) const {
  const Tensor a = attn_(x, memory, memory).output;
  const Tensor h = norm1_(ad::add(x, ctx.drop(a)));
  return norm2_(ad::add(h, ctx.drop(ffn_(h, ctx))));
}

TransformerDecoderBlock::TransformerDecoderBlock(ParamStore& store, const std::string& name,
                                                 std::size_t d_model, std::size_t heads,
                                                 std::size_t ff_inner)
    : self_attn_(store, name + ".self_attn", d_model, heads),
      norm1_(store, name + ".norm1", d_model),
      cross_attn_(store, name + ".cross_attn", d_model, heads),
      norm2_(store, name + ".norm2", d_model),
      ffn_(store, name + ".ffn", d_model, ff_inner),
      norm3_(store, name + ".norm3", d_model) {}

DecoderOutput TransformerDecoderBlock::operator()(const Tensor& x, const Tensor& encoded,
                                                  const ForwardContext& ctx) const {
  const AttentionMask causal = AttentionMask::causal(x.rows());
  const Tensor s = self_attn_(x, x, x, &causal).output;
  const Tensor c = norm1_(ad::add(x, ctx.drop(s)));
  AttentionOutput cross = cross_attn_(c, encoded, encoded);
  const Tensor h = norm2_(ad::add(c, ctx.drop(cross.output)));
  return {norm3_(ad::add(h, ctx.drop(ffn_(h, ctx)))), std::move(cross.head_weights)};
}

LstmCell::LstmCell(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden)
    : hidden_(hidden),
      input_weight_(store.add(name + ".input_weight", {in, 4 * hidden}, Init::xavier)),
      hidden_weight_(store.add(name + ".hidden_weight", {hidden, 4 * hidden}, Init::xavier)),
      bias_(store.add(name + ".bias", {4 * hidden}, Init::zeros)) {}

Tensor LstmCell::scan(const Tensor& x, bool reverse) const {
  const std::size_t n = x.rows();
  if (n == 0) throw ContractError("LSTM over an empty sequence");
  const std::size_t h = hidden_;
  const Tensor projected = ad::add_row(ad::matmul(x, input_weight_), bias_);
  Tensor state = Tensor::zeros({1, h});
  Tensor cell = Tensor::zeros({1, h});
  std::vector<Tensor> outputs(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    const Tensor gates =
        ad::add(ad::slice_rows(projected, t, t + 1), ad::matmul(state, hidden_weight_));
    const Tensor in_gate = ad::sigmoid(ad::slice_cols(gates, 0, h));
    const Tensor forget_gate = ad::sigmoid(ad::slice_cols(gates, h, 2 * h));
    const Tensor out_gate = ad::sigmoid(ad::slice_cols(gates, 2 * h, 3 * h));
    const Tensor candidate = ad::tanh(ad::slice_cols(gates, 3 * h, 4 * h));
    cell = ad::add(ad::mul(forget_gate, cell), ad::mul(in_gate, candidate));
    state = ad::mul(out_gate, ad::tanh(cell));
    outputs[t] = state;
  }
  return ad::concat_rows(outputs);
}

BiLstm::BiLstm(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden)
    : forward_(store, name + ".forward", in, hidden), backward_(store, name + ".backward", in, hidden) {}

Tensor BiLstm::operator()(const Tensor& x) const {
  return ad::concat_cols(forward_.scan(x, false), backward_.scan(x, true));
}

Tensor sinusoidal_positions(std::size_t n, std::size_t d) {
  std::vector<double> pe(n * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      pe[pos * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor({n, d}, std::move(pe));
}

Tensor embed(std::span<const std::size_t> ids, const Tensor& table, bool positional) {
  if (ids.empty()) throw ContractError("embed: empty id sequence");
  Tensor rows = ad::embedding(table, ids);
  if (!positional) return rows;
  return ad::add(rows, sinusoidal_positions(ids.size(), table.cols()));
}

}  // namespace kpj::nn
