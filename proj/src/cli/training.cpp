#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <random>

#include "kpj/cli/commands.hpp"
#include "kpj/core/errors.hpp"

namespace kpj::cli {

using ad::Tensor;
using corpus::Example;
using nn::ForwardContext;

namespace {

struct Loop {
  std::string label;
  ad::NamedParams params;
  ad::AdamConfig adam;
  std::int64_t max_steps = 0;
  std::size_t batch = 1;
  std::int64_t eval_every = 1;
  std::int64_t patience = 0;
  std::int64_t log_every = 1;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> items;
  std::function<Tensor(std::size_t, const ForwardContext&)> loss;
  std::function<double()> validate;  // higher is better
  std::ostream* log = nullptr;
};

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

std::vector<std::vector<double>> snapshot(const ad::NamedParams& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore(ad::NamedParams& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

TrainReport run(Loop& L) {
  if (L.items.empty()) throw ConfigError(L.label + ": no training examples");
  TrainReport report;
  auto state = ad::make_optimizer_state(L.adam, L.params);
  std::mt19937_64 order_rng(L.seed ^ 0x6f7264657200ULL);
  std::mt19937_64 drop_rng(L.seed);
  ForwardContext ctx;
  ctx.training = true;
  ctx.dropout = L.dropout;
  ctx.rng = &drop_rng;

  std::vector<std::size_t> order = L.items;
  shuffle(order, order_rng);
  std::size_t cursor = 0;
  auto best = snapshot(L.params);
  double best_score = -std::numeric_limits<double>::infinity();
  std::int64_t stale = 0;

  auto evaluate = [&](std::int64_t step) {
    const double score = L.validate();
    if (L.log) *L.log << L.label << " step " << step << " validation " << score << '\n';
    if (score > best_score) {
      best_score = score;
      best = snapshot(L.params);
      report.best_step = step;
      stale = 0;
      return false;
    }
    ++stale;
    return L.patience > 0 && stale >= L.patience;
  };

  for (std::int64_t step = 1; step <= L.max_steps; ++step) {
    double total = 0.0;
    for (std::size_t b = 0; b < L.batch; ++b) {
      if (cursor == order.size()) {
        shuffle(order, order_rng);
        cursor = 0;
      }
      const Tensor loss = L.loss(order[cursor++], ctx);
      if (!std::isfinite(loss.item())) {
        throw NumericError(L.label + ": loss is not finite at step " + std::to_string(step));
      }
      ad::backward(L.batch == 1 ? loss : ad::affine(loss, 1.0 / static_cast<double>(L.batch), 0.0));
      total += loss.item();
    }
    ad::adam_step(L.params, state);
    for (auto& [name, p] : L.params) p.clear_grad();
    report.losses.push_back(total / static_cast<double>(L.batch));
    report.steps = step;
    if (L.log && step % L.log_every == 0) {
      *L.log << L.label << " step " << step << " loss " << report.losses.back() << " lr "
             << ad::effective_lr(L.adam, step - 1) << '\n';
    }
    if (step % L.eval_every == 0 || step == L.max_steps) {
      if (evaluate(step)) {
        report.early_stopped = true;
        if (L.log) *L.log << L.label << " early stop at step " << step << '\n';
        break;
      }
    }
  }
  if (L.max_steps == 0) evaluate(0);
  restore(L.params, best);
  report.best_score = best_score;
  return report;
}

std::vector<std::size_t> all_items(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

double pke_validation(const pke::PkeModel& model, const std::vector<Example>& examples,
                      const corpus::Vocabulary& vocab, const RunConfig& config) {
  std::vector<std::optional<metrics::DocScore>> scores;
  const auto opts = config.eval().match;
  for (const auto& ex : examples) {
    const auto pred = model.predict(ex, vocab, config.filter_k);
    std::vector<std::string> preds, gold;
    for (const auto& p : pred.phrases) preds.push_back(corpus::join(p.tokens));
    for (const auto& p : ex.present) gold.push_back(corpus::join(p.tokens));
    scores.push_back(metrics::f1_at_m(preds, gold, opts));
  }
  const auto m = metrics::macro_average(std::span<const std::optional<metrics::DocScore>>(scores));
  return m.f1.value.value_or(0.0);
}

Checkpoint base_checkpoint(const char* kind, std::int64_t step, const RunConfig& config,
                           const corpus::Vocabulary& encoder_vocab, const corpus::Vocabulary& generator_vocab) {
  Checkpoint c;
  c.kind = kind;
  c.step = static_cast<std::uint64_t>(step);
  c.config = config.to_text();
  c.encoder_vocab = encoder_vocab;
  c.generator_vocab = generator_vocab;
  return c;
}

}  // namespace

TrainReport cmd_train_pke(const std::string& cache, const RunConfig& config, const std::string& out,
                          const TrainOptions& options) {
  config.validate();
  const corpus::Corpus data = corpus::load_cache(cache);
  const std::vector<Example> valid =
      options.valid_cache.empty() ? data.examples : corpus::load_cache(options.valid_cache).examples;

  pke::PkeModel model(config.pke_config(data.encoder_vocab.size()), config.seed);
  Loop loop;
  loop.label = "pke";
  loop.params = model.all_params();
  loop.adam = config.adam(config.pke_warmup);
  loop.max_steps = config.pke_max_steps;
  loop.batch = config.batch;
  loop.eval_every = config.eval_every;
  loop.patience = config.patience;
  loop.log_every = config.log_every;
  loop.dropout = config.dropout;
  loop.seed = config.seed;
  loop.items = all_items(data.examples.size());
  loop.loss = [&](std::size_t i, const ForwardContext& ctx) {
    return model.loss(data.examples[i], data.encoder_vocab, ctx);
  };
  loop.validate = [&] { return pke_validation(model, valid, data.encoder_vocab, config); };
  loop.log = options.log;
  const TrainReport report = run(loop);

  Checkpoint ckpt = base_checkpoint("pke", report.best_step, config, data.encoder_vocab, data.generator_vocab);
  store_tensors(model.encoder().params(), ckpt.tensors);
  store_tensors(model.head_params(), ckpt.tensors);
  save_checkpoint(ckpt, out);
  return report;
}

namespace {

struct AkgItem {
  SourceView source;
  std::vector<std::vector<std::size_t>> targets;
  Tensor states;  // precomputed H for a frozen encoder
};

AkgItem make_item(const Example& ex, const corpus::Vocabulary& generator_vocab) {
  AkgItem item;
  item.source = source_view(ex, generator_vocab);
  for (const auto& phrase : ex.absent) {
    std::vector<std::size_t> ids;
    for (const auto& w : phrase) ids.push_back(item.source.map.ext_id(w, generator_vocab));
    item.targets.push_back(std::move(ids));
  }
  return item;
}

}  // namespace

TrainReport cmd_train_akg(const std::string& cache, const std::string& pke_checkpoint, const RunConfig& config,
                          const std::string& out, const TrainOptions& options) {
  config.validate();
  const corpus::Corpus data = corpus::load_cache(cache);
  const std::vector<Example> valid =
      options.valid_cache.empty() ? data.examples : corpus::load_cache(options.valid_cache).examples;

  RunConfig run_config = config;
  corpus::Vocabulary encoder_vocab = data.encoder_vocab;
  std::optional<pke::SharedEncoder> encoder;
  const bool trainable = config.encoder_mode == EncoderMode::trainable;
  if (config.fusion_enabled) {
    if (config.encoder_mode == EncoderMode::fresh) {
      encoder.emplace(config.pke_config(encoder_vocab.size()).encoder, config.seed);
    } else {
      const std::string mode(encoder_mode_name(config.encoder_mode));
      if (pke_checkpoint.empty()) throw ConfigError("encoder.mode=" + mode + " needs a PKE checkpoint");
      if (!std::filesystem::exists(pke_checkpoint)) {
        throw ConfigError("PKE checkpoint " + pke_checkpoint + " does not exist");
      }
      const Checkpoint pk = load_checkpoint(pke_checkpoint);
      if (pk.kind != "pke") throw ConfigError(pke_checkpoint + " is a " + pk.kind + " checkpoint, not pke");
      const RunConfig pc = config_of(pk);
      encoder.emplace(pc.pke_config(pk.encoder_vocab.size()).encoder, pc.seed);
      restore_tensors(pk, encoder->params());
      encoder_vocab = pk.encoder_vocab;
      run_config.encoder_width = pc.encoder_width;
      run_config.encoder_layers = pc.encoder_layers;
      run_config.encoder_heads = pc.encoder_heads;
      run_config.encoder_ff = pc.encoder_ff;
      run_config.max_len = pc.max_len;
      run_config.seed = config.seed;
    }
    encoder->params().set_trainable(trainable);
  }

  akg::AkgModel model(run_config.akg_config(data.generator_vocab.size()), run_config.seed);
  const bool frozen = encoder && !trainable;

  auto prepare_items = [&](const std::vector<Example>& examples) {
    std::vector<AkgItem> items;
    ad::NoGradScope no_grad;
    for (const auto& ex : examples) {
      items.push_back(make_item(ex, data.generator_vocab));
      if (frozen && !ex.absent.empty()) items.back().states = shared_states(*encoder, ex, encoder_vocab, {});
    }
    return items;
  };
  const std::vector<AkgItem> train_items = prepare_items(data.examples);
  const std::vector<AkgItem> valid_items =
      options.valid_cache.empty() ? std::vector<AkgItem>{} : prepare_items(valid);
  const std::vector<AkgItem>& check_items = options.valid_cache.empty() ? train_items : valid_items;
  const std::vector<Example>& check_examples = options.valid_cache.empty() ? data.examples : valid;

  auto item_loss = [&](const AkgItem& item, const Example& ex, const ForwardContext& ctx) {
    Tensor states;
    if (encoder) states = frozen ? item.states : shared_states(*encoder, ex, encoder_vocab, ctx);
    const Tensor memory = model.memory(item.source.input_ids, states, ctx);
    Tensor total;
    for (const auto& target : item.targets) {
      const Tensor nll = model.nll(target, memory, item.source.map, ctx);
      total = total.defined() ? ad::add(total, nll) : nll;
    }
    return total;
  };

  Loop loop;
  loop.label = "akg";
  loop.params = model.params().entries();
  if (encoder && trainable) {
    const auto& enc = encoder->params().entries();
    loop.params.insert(loop.params.end(), enc.begin(), enc.end());
  }
  loop.adam = config.adam(config.akg_warmup);
  loop.max_steps = config.akg_max_steps;
  loop.batch = config.batch;
  loop.eval_every = config.eval_every;
  loop.patience = config.patience;
  loop.log_every = config.log_every;
  loop.dropout = config.dropout;
  loop.seed = config.seed;
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    if (!data.examples[i].absent.empty()) loop.items.push_back(i);
  }
  loop.loss = [&](std::size_t i, const ForwardContext& ctx) {
    return item_loss(train_items[i], data.examples[i], ctx);
  };
  loop.validate = [&] {
    ad::NoGradScope no_grad;
    double total = 0.0;
    std::size_t phrases = 0;
    for (std::size_t i = 0; i < check_items.size(); ++i) {
      if (check_items[i].targets.empty()) continue;
      total += item_loss(check_items[i], check_examples[i], {}).item();
      phrases += check_items[i].targets.size();
    }
    return phrases ? -total / static_cast<double>(phrases) : 0.0;
  };
  loop.log = options.log;
  const TrainReport report = run(loop);

  Checkpoint ckpt = base_checkpoint("akg", report.best_step, run_config, encoder_vocab, data.generator_vocab);
  store_tensors(model.params(), ckpt.tensors);
  if (encoder) store_tensors(encoder->params(), ckpt.tensors);
  save_checkpoint(ckpt, out);
  return report;
}

}  // namespace kpj::cli
