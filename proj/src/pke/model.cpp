#include "kpj/pke/model.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "kpj/core/errors.hpp"
#include "kpj/pke/crf.hpp"

namespace kpj::pke {

using ad::Init;

SharedEncoder::SharedEncoder(const SharedEncoderConfig& config, std::uint64_t seed)
    : config_(config), store_(seed) {
  if (config.vocab_size == 0) throw ConfigError("shared encoder needs a vocabulary");
  const std::size_t d = config.width;
  const std::size_t ff = config.ff_inner ? config.ff_inner : 4 * d;
  tokens_ = store_.add("encoder.token_embedding", {config.vocab_size, d}, Init::uniform);
  positions_ = store_.add("encoder.position_embedding", {config.max_len, d}, Init::uniform);
  segments_ = store_.add("encoder.segment_embedding", {2, d}, Init::uniform);
  embed_norm_ = nn::LayerNorm(store_, "encoder.embed_norm", d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    blocks_.emplace_back(store_, "encoder.block" + std::to_string(l), d, config.heads, ff);
  }
}

Tensor SharedEncoder::operator()(std::span<const std::size_t> ids, std::span<const std::size_t> segments,
                                 const ForwardContext& ctx) const {
  if (ids.empty()) throw ContractError("shared encoder: empty input");
  if (ids.size() > config_.max_len) {
    throw ContractError("shared encoder: " + std::to_string(ids.size()) + " positions exceed max_len " +
                        std::to_string(config_.max_len));
  }
  std::vector<std::size_t> pos(ids.size());
  std::iota(pos.begin(), pos.end(), 0);
  Tensor x = ad::add(ad::add(ad::embedding(tokens_, ids), ad::embedding(positions_, pos)),
                     ad::embedding(segments_, segments));
  x = ctx.drop(embed_norm_(x));
  for (const auto& block : blocks_) x = block(x, ctx);
  return x;
}

MarkedDocument mark_sentences(std::span<const std::size_t> token_ids, std::span<const Span> sentences,
                              std::size_t max_len) {
  if (token_ids.empty() || sentences.empty()) throw ContractError("cannot encode an empty document");
  MarkedDocument m;
  m.alignment.reserve(token_ids.size());
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const Span span = sentences[s];
    if (span.end > token_ids.size() || span.begin >= span.end) throw ContractError("invalid sentence span");
    if (m.ids.size() + span.size() + 2 > max_len) break;
    const std::size_t segment = s % 2;
    m.cls_positions.push_back(m.ids.size());
    m.ids.push_back(Vocabulary::kCls);
    m.segments.push_back(segment);
    for (std::size_t i = span.begin; i < span.end; ++i) {
      m.alignment.push_back(m.ids.size());
      m.ids.push_back(token_ids[i]);
      m.segments.push_back(segment);
    }
    m.ids.push_back(Vocabulary::kSep);
    m.segments.push_back(segment);
    ++m.kept_sentences;
    m.kept_tokens = span.end;
  }
  if (m.kept_sentences == 0) throw ContractError("first sentence does not fit into max_len");
  return m;
}

Tensor filter_loss(const Tensor& scores, std::span<const std::uint8_t> labels, bool strict) {
  if (scores.size() != labels.size()) throw ContractError("filter_loss: score/label length mismatch");
  std::vector<double> y(labels.begin(), labels.end());
  const Tensor target = Tensor::matrix(scores.rows(), scores.cols(), y);
  constexpr double kFloor = 1e-12;
  const Tensor pos = ad::mul(target, ad::log(scores, kFloor));
  if (strict) return ad::affine(ad::sum(pos), -1.0, 0.0);
  const Tensor neg = ad::mul(ad::affine(target, -1.0, 1.0), ad::log(ad::affine(scores, -1.0, 1.0), kFloor));
  return ad::affine(ad::mean(ad::add(pos, neg)), -1.0, 0.0);
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw ContractError("top-K selection needs K >= 1");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (k < idx.size()) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

PkeModel::PkeModel(const PkeConfig& config, std::uint64_t seed)
    : config_(config), encoder_(config.encoder, seed), heads_(seed) {
  const std::size_t d = config.encoder.width;
  const std::size_t ff = config.encoder.ff_inner ? config.encoder.ff_inner : 4 * d;
  for (std::size_t l = 0; l < 2; ++l) {
    filter_blocks_.emplace_back(heads_, "filter.block" + std::to_string(l), d, config.filter_heads, ff);
  }
  filter_weight_ = heads_.add("filter.score_weight", {d, 1}, Init::uniform);
  lstm_ = nn::BiLstm(heads_, "tagger.lstm", d, config.lstm_hidden);
  projection_ = nn::Linear(heads_, "tagger.emission", lstm_.output_width(), corpus::kTagCount);
  transitions_ = heads_.add("tagger.transitions", {corpus::kTagCount + 2, corpus::kTagCount + 2}, Init::zeros);
}

ad::NamedParams PkeModel::all_params() const {
  ad::NamedParams out(encoder_.params().entries());
  out.insert(out.end(), heads_.entries().begin(), heads_.entries().end());
  return out;
}

EncodedDocument PkeModel::encode_with_cls(std::span<const std::size_t> token_ids,
                                          std::span<const Span> sentences, const ForwardContext& ctx) const {
  EncodedDocument enc;
  enc.marked = mark_sentences(token_ids, sentences, config_.encoder.max_len);
  enc.states = encoder_(enc.marked.ids, enc.marked.segments, ctx);
  enc.cls_vectors = ad::gather_rows(enc.states, enc.marked.cls_positions);
  return enc;
}

Tensor PkeModel::score_sentences(const Tensor& cls_vectors, const ForwardContext& ctx) const {
  Tensor g = cls_vectors;
  for (const auto& block : filter_blocks_) g = block(g, ctx);
  return ad::sigmoid(ad::matmul(g, filter_weight_));
}

Tensor PkeModel::emissions(const Tensor& token_states) const { return projection_(lstm_(token_states)); }

std::vector<std::size_t> PkeModel::decode_tags(const Tensor& em) const {
  return config_.use_crf ? viterbi_decode(em, transitions_).path : argmax_tags(em);
}

Tensor PkeModel::loss(const Example& example, const Vocabulary& vocab, const ForwardContext& ctx) const {
  const auto ids = vocab.encode(example.tokens);
  const EncodedDocument enc = encode_with_cls(ids, example.sentences, ctx);
  const std::size_t kept = enc.marked.kept_sentences;
  Tensor total;
  if (config_.filter_enabled) {
    const Tensor scores = score_sentences(enc.cls_vectors, ctx);
    const std::span<const std::uint8_t> labels(example.sentence_labels.data(), kept);
    total = filter_loss(scores, labels, config_.one_sided_filter);
  }

  // without the filter the tagger sees every sentence it will be run on
  std::vector<std::size_t> rows;
  std::vector<std::size_t> gold;
  for (std::size_t s = 0; s < kept; ++s) {
    if (config_.filter_enabled && !example.sentence_labels[s]) continue;
    for (std::size_t i = example.sentences[s].begin; i < example.sentences[s].end; ++i) {
      rows.push_back(enc.marked.alignment[i]);
      gold.push_back(static_cast<std::size_t>(example.iob[i]));
    }
  }
  if (rows.empty()) return total.defined() ? total : ad::affine(ad::sum(enc.cls_vectors), 0.0, 0.0);
  const Tensor em = emissions(ad::gather_rows(enc.states, rows));
  const Tensor tag_loss = config_.use_crf ? crf_nll(em, transitions_, gold) : token_cross_entropy(em, gold);
  return total.defined() ? ad::add(total, tag_loss) : tag_loss;
}

PkePrediction PkeModel::predict(const Example& example, const Vocabulary& vocab,
                                std::optional<std::size_t> k) const {
  ad::NoGradScope no_grad;
  const ForwardContext ctx;
  const auto ids = vocab.encode(example.tokens);
  const EncodedDocument enc = encode_with_cls(ids, example.sentences, ctx);
  const std::size_t kept = enc.marked.kept_sentences;

  PkePrediction out;
  const Tensor scores = score_sentences(enc.cls_vectors, ctx);
  out.sentence_scores.assign(scores.data().begin(), scores.data().end());
  if (config_.filter_enabled) {
    out.selected = select_top_k(out.sentence_scores, k.value_or(config_.top_k));
  } else {
    out.selected.resize(kept);
    std::iota(out.selected.begin(), out.selected.end(), 0);
  }

  out.tags.assign(example.tokens.size(), corpus::Tag::O);
  std::set<corpus::Tokens> seen;
  for (std::size_t s : out.selected) {
    const Span span = example.sentences[s];
    std::vector<std::size_t> rows;
    for (std::size_t i = span.begin; i < span.end; ++i) rows.push_back(enc.marked.alignment[i]);
    const auto path = decode_tags(emissions(ad::gather_rows(enc.states, rows)));
    std::vector<corpus::Tag> tags;
    for (std::size_t i = 0; i < path.size(); ++i) {
      tags.push_back(static_cast<corpus::Tag>(path[i]));
      out.tags[span.begin + i] = tags.back();
    }
    const std::span<const std::string> words(example.tokens.data() + span.begin, span.size());
    for (auto& phrase : corpus::extract_spans(tags, words)) {
      if (!seen.insert(phrase.tokens).second) continue;
      phrase.position += span.begin;
      out.phrases.push_back(std::move(phrase));
    }
  }
  return out;
}

}  // namespace kpj::pke
