#include "kpj/akg/model.hpp"

#include <cmath>
#include <limits>

#include "kpj/core/errors.hpp"

namespace kpj::akg {

using ad::Init;
using corpus::Vocabulary;

AkgModel::AkgModel(const AkgConfig& config, std::uint64_t seed) : config_(config), store_(seed) {
  if (config.vocab_size == 0) throw ConfigError("generator needs a vocabulary");
  const std::size_t d = config.width;
  const std::size_t ff = config.ff_inner ? config.ff_inner : 4 * d;
  embedding_ = store_.add("akg.embedding", {config.vocab_size, d}, Init::uniform);
  for (std::size_t l = 0; l < config.layers; ++l) {
    encoder_blocks_.emplace_back(store_, "akg.encoder.block" + std::to_string(l), d, config.heads, ff);
  }
  if (config.fusion) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      fusion_blocks_.emplace_back(store_, "akg.fusion.block" + std::to_string(l), d, config.heads, ff,
                                  config.shared_width);
    }
    gate_ = nn::Linear(store_, "akg.fusion.gate", 2 * d, d);
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    decoder_blocks_.emplace_back(store_, "akg.decoder.block" + std::to_string(l), d, config.heads, ff);
  }
  vocab_projection_ = nn::Linear(store_, "akg.output", d, config.vocab_size);
  switch_ = nn::Linear(store_, "akg.copy_switch", d, 1);
}

namespace {

Tensor scaled_embedding(std::span<const std::size_t> ids, const Tensor& table) {
  const double scale = std::sqrt(static_cast<double>(table.cols()));
  return ad::add(ad::affine(ad::embedding(table, ids), scale, 0.0),
                 nn::sinusoidal_positions(ids.size(), table.cols()));
}

}  // namespace

Tensor AkgModel::encode_source(std::span<const std::size_t> source_ids, const ForwardContext& ctx) const {
  if (source_ids.empty()) throw ContractError("generator: empty source document");
  Tensor x = ctx.drop(scaled_embedding(source_ids, embedding_));
  for (const auto& block : encoder_blocks_) x = block(x, ctx);
  return x;
}

Tensor AkgModel::fuse(const Tensor& encoded, const Tensor& shared_states, const ForwardContext& ctx) const {
  if (!config_.fusion) return encoded;
  if (!shared_states.defined()) throw ConfigError("fusion is enabled but no shared-encoder states were given");
  if (shared_states.cols() != config_.shared_width) {
    throw DimensionError("shared-encoder states are " + std::to_string(shared_states.cols()) +
                         " wide, fusion expects " + std::to_string(config_.shared_width));
  }
  Tensor fused = encoded;
  for (const auto& block : fusion_blocks_) fused = block.attend(fused, shared_states, ctx);
  const Tensor gate = ad::sigmoid(gate_(ad::concat_cols(encoded, fused)));
  return ad::add(ad::mul(gate, encoded), ad::mul(ad::affine(gate, -1.0, 1.0), fused));
}

Tensor AkgModel::memory(std::span<const std::size_t> source_ids, const Tensor& shared_states,
                        const ForwardContext& ctx) const {
  return fuse(encode_source(source_ids, ctx), shared_states, ctx);
}

DecodeOutput AkgModel::decode(std::span<const std::size_t> prefix, const Tensor& memory,
                              const ForwardContext& ctx) const {
  if (prefix.empty() || prefix[0] != Vocabulary::kBos) throw ContractError("decoder prefix must start with <s>");
  if (prefix.size() > config_.beam_depth + 1) {
    throw ContractError("decoder prefix of " + std::to_string(prefix.size()) + " exceeds beam depth " +
                        std::to_string(config_.beam_depth) + " + 1");
  }
  Tensor x = ctx.drop(scaled_embedding(prefix, embedding_));
  DecodeOutput out;
  std::vector<Tensor> heads;
  for (const auto& block : decoder_blocks_) {
    auto step = block(x, memory, ctx);
    x = step.output;
    heads = std::move(step.cross_head_weights);
  }
  out.states = x;
  out.copy_attention = ad::average(heads);
  return out;
}

Tensor AkgModel::copy_switch(const Tensor& states) const { return ad::sigmoid(switch_(states)); }

Tensor AkgModel::vocab_distribution(const Tensor& states) const {
  return ad::softmax(vocab_projection_(states), 1);
}

Tensor AkgModel::output_distribution(const DecodeOutput& decoded, const ExtendedVocabMap& map) const {
  return mix_copy_distribution(copy_switch(decoded.states), vocab_distribution(decoded.states),
                               decoded.copy_attention, map);
}

Tensor AkgModel::nll(std::span<const std::size_t> target, const Tensor& memory, const ExtendedVocabMap& map,
                     const ForwardContext& ctx) const {
  std::vector<std::size_t> inputs{Vocabulary::kBos};
  std::vector<std::size_t> gold;
  for (auto id : target) {
    inputs.push_back(map.input_id(id));
    gold.push_back(id);
  }
  gold.push_back(Vocabulary::kEos);
  const Tensor p = output_distribution(decode(inputs, memory, ctx), map);
  return ad::affine(ad::sum(ad::log(ad::gather_cols(p, gold), 1e-12)), -1.0, 0.0);
}

std::vector<RankedPhrase> AkgModel::generate(const Tensor& memory, const ExtendedVocabMap& map,
                                             const Vocabulary& vocab, const BeamConfig& beam) const {
  if (beam.depth > config_.beam_depth) {
    throw ConfigError("beam depth " + std::to_string(beam.depth) + " exceeds the model's limit " +
                      std::to_string(config_.beam_depth));
  }
  ad::NoGradScope no_grad;
  const ForwardContext ctx;
  const Tensor mem = memory.detach();
  auto step = [&](std::span<const std::size_t> prefix) {
    std::vector<std::size_t> inputs{Vocabulary::kBos};
    for (auto id : prefix) inputs.push_back(map.input_id(id));
    const DecodeOutput full = decode(inputs, mem, ctx);
    const std::size_t t = inputs.size();
    const DecodeOutput last{ad::slice_rows(full.states, t - 1, t), ad::slice_rows(full.copy_attention, t - 1, t)};
    const Tensor p = output_distribution(last, map);
    std::vector<double> logp(p.size());
    for (std::size_t i = 0; i < logp.size(); ++i) logp[i] = p.data()[i] > 0 ? std::log(p.data()[i]) : -INFINITY;
    for (auto banned : {Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kBos, Vocabulary::kCls, Vocabulary::kSep}) {
      logp[banned] = -std::numeric_limits<double>::infinity();
    }
    return logp;
  };
  auto surface = [&](std::span<const std::size_t> tokens) {
    std::string s;
    for (auto id : tokens) s += map.surface(id, vocab) + ' ';
    return s;
  };
  return beam_search(step, Vocabulary::kEos, beam, surface);
}

}  // namespace kpj::akg
