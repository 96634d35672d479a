#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "kpj/core/errors.hpp"
#include "kpj/core/gradcheck.hpp"
#include "kpj/pke/crf.hpp"
#include "kpj/pke/model.hpp"

using namespace kpj;
using namespace kpj::ad;
using namespace kpj::pke;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = u(rng);
  return Tensor::matrix(r, c, v);
}

// transitions for T tags with start row T and stop column T+1
double path_score(const Tensor& em, const Tensor& tr, const std::vector<std::size_t>& path) {
  const std::size_t t = em.cols();
  double s = tr.at(t, path.front()) + tr.at(path.back(), t + 1);
  for (std::size_t i = 0; i < path.size(); ++i) s += em.at(i, path[i]);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) s += tr.at(path[i], path[i + 1]);
  return s;
}

std::vector<std::vector<std::size_t>> all_paths(std::size_t n, std::size_t tags) {
  std::vector<std::vector<std::size_t>> out{{}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& p : out) {
      for (std::size_t t = 0; t < tags; ++t) {
        next.push_back(p);
        next.back().push_back(t);
      }
    }
    out = std::move(next);
  }
  return out;
}

corpus::Example toy_example(bool with_phrase) {
  corpus::RawDocument doc;
  doc.title = "graph kernels for molecules";
  doc.abstract = "we compare kernels . results are strong ; a note follows";
  doc.keyphrases = {with_phrase ? "graph kernels" : "protein folding"};
  return corpus::prepare_example(doc);
}

corpus::Vocabulary vocab_for(const corpus::Example& ex) {
  corpus::VocabularyBuilder b;
  b.count(ex.tokens);
  return b.build(100);
}

PkeConfig tiny_config(std::size_t vocab) {
  PkeConfig c;
  c.encoder.vocab_size = vocab;
  c.encoder.width = 8;
  c.encoder.layers = 1;
  c.encoder.heads = 2;
  c.encoder.max_len = 64;
  c.filter_heads = 2;
  c.lstm_hidden = 3;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("crf worked examples") {
  PrecisionScope p(Precision::f64);
  const Tensor em = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor tr = Tensor::zeros({4, 4});
  const std::vector<std::size_t> ob{0, 1};
  CHECK(crf_nll(em, tr, ob).item() == doctest::Approx(2.0 * std::log(1.0 + std::exp(1.0)) - 2.0).epsilon(1e-12));
  CHECK(crf_nll(em, tr, ob).item() == doctest::Approx(0.6265).epsilon(1e-4));

  const Tensor one = Tensor::matrix(1, 2, {0, 0});
  for (std::size_t g : {0u, 1u}) {
    const std::vector<std::size_t> gold{g};
    CHECK(crf_nll(one, tr, gold).item() == doctest::Approx(std::log(2.0)));
  }

  const Tensor dominant = Tensor::matrix(3, 3, {100, 0, 0, 0, 100, 0, 0, 0, 100});
  const std::vector<std::size_t> diag{0, 1, 2};
  const double nll = crf_nll(dominant, Tensor::zeros({5, 5}), diag).item();
  CHECK(nll >= 0.0);
  CHECK(nll < 1e-9);
}

TEST_CASE("viterbi worked examples") {
  const auto best = viterbi_decode(Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::zeros({4, 4}));
  CHECK(best.path == std::vector<std::size_t>{0, 1});
  CHECK(best.score == doctest::Approx(2.0));
  const auto single = viterbi_decode(Tensor::matrix(1, 2, {3, -1}), Tensor::zeros({4, 4}));
  CHECK(single.path == std::vector<std::size_t>{0});
  CHECK(single.score == doctest::Approx(3.0));
  CHECK(viterbi_decode(Tensor::zeros({4, 3}), Tensor::zeros({5, 5})).path == std::vector<std::size_t>(4, 0));
}

TEST_CASE("crf agrees with exhaustive enumeration") {
  PrecisionScope p(Precision::f64);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Tensor em = random_matrix(n, 3, 100 * n + seed, 2.0);
      const Tensor tr = random_matrix(5, 5, 200 * n + seed, 2.0);
      const auto paths = all_paths(n, 3);
      double best = -1e300, z = 0.0;
      std::vector<std::size_t> argmax;
      for (const auto& path : paths) {
        const double s = path_score(em, tr, path);
        z += std::exp(s);
        if (s > best) {
          best = s;
          argmax = path;
        }
      }
      const double log_z = std::log(z);
      CHECK(crf_log_partition(em, tr) == doctest::Approx(log_z).epsilon(1e-9));
      const auto v = viterbi_decode(em, tr);
      CHECK(v.path == argmax);
      CHECK(v.score == doctest::Approx(best).epsilon(1e-12));
      for (const auto& gold : {paths.front(), paths.back(), argmax}) {
        const double nll = crf_nll(em, tr, gold).item();
        CHECK(nll == doctest::Approx(log_z - path_score(em, tr, gold)).epsilon(1e-9));
        CHECK(std::exp(-nll) > 0.0);
        CHECK(std::exp(-nll) <= 1.0);
      }
    }
  }
}

TEST_CASE("crf gradients match finite differences") {
  const Tensor em = random_matrix(4, 3, 1);
  const Tensor tr = random_matrix(5, 5, 2);
  const std::vector<std::size_t> gold{1, 2, 0, 1};
  CHECK(finite_diff_check([&](const Tensor& e) { return crf_nll(e, tr, gold); }, em) < 1e-6);
  CHECK(finite_diff_check([&](const Tensor& t) { return crf_nll(em, t, gold); }, tr) < 1e-6);
  CHECK(finite_diff_check([&](const Tensor& e) { return token_cross_entropy(e, gold); }, em) < 1e-6);
}

TEST_CASE("linear tagger decoding") {
  CHECK(argmax_tags(Tensor::matrix(2, 3, {0, 2, 1, 5, 5, 0})) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("filter_loss examples") {
  PrecisionScope p(Precision::f64);
  const std::vector<std::uint8_t> one{1};
  CHECK(filter_loss(Tensor::matrix(1, 1, {0.5}), one).item() == doctest::Approx(0.6931).epsilon(1e-4));
  const std::vector<std::uint8_t> labels{1, 0};
  CHECK(filter_loss(Tensor::matrix(2, 1, {1.0 - 1e-12, 1e-12}), labels).item() < 1e-9);
  const std::vector<std::uint8_t> zero{0};
  const double clamped = filter_loss(Tensor::matrix(1, 1, {1.0}), zero).item();
  CHECK(clamped == doctest::Approx(-std::log(1e-12)));
  CHECK(filter_loss(Tensor::matrix(1, 1, {0.9}), zero).item() < filter_loss(Tensor::matrix(1, 1, {0.99}), zero).item());
  CHECK(filter_loss(Tensor::matrix(1, 1, {0.9}), zero, true).item() == 0.0);
  CHECK_THROWS_AS(filter_loss(Tensor::matrix(1, 1, {0.5}), labels), ContractError);
}

TEST_CASE("select_top_k examples") {
  CHECK(select_top_k(std::vector<double>{0.9, 0.2, 0.5}, 2) == std::vector<std::size_t>{0, 2});
  CHECK(select_top_k(std::vector<double>{0.9, 0.2, 0.5}, 7) == std::vector<std::size_t>{0, 1, 2});
  CHECK(select_top_k(std::vector<double>{0.5, 0.5}, 1) == std::vector<std::size_t>{0});
  CHECK(select_top_k(std::vector<double>{0.1, 0.7, 0.7, 0.3, 0.9}, 3) == std::vector<std::size_t>{1, 2, 4});
  CHECK_THROWS_AS(select_top_k(std::vector<double>{0.5}, 0), ContractError);
}

TEST_CASE("mark_sentences examples") {
  using corpus::Vocabulary;
  const std::vector<std::size_t> ids{10, 11, 12};
  const std::vector<corpus::Span> spans{{0, 2}, {2, 3}};
  const auto m = mark_sentences(ids, spans, 512);
  CHECK(m.ids == std::vector<std::size_t>{Vocabulary::kCls, 10, 11, Vocabulary::kSep, Vocabulary::kCls, 12,
                                          Vocabulary::kSep});
  CHECK(m.segments == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1});
  CHECK(m.cls_positions == std::vector<std::size_t>{0, 4});
  CHECK(m.alignment == std::vector<std::size_t>{1, 2, 5});

  const auto cut = mark_sentences(ids, spans, 6);
  CHECK(cut.kept_sentences == 1);
  CHECK(cut.kept_tokens == 2);
  CHECK_THROWS_AS(mark_sentences(ids, spans, 3), ContractError);
  CHECK_THROWS_AS(mark_sentences(std::vector<std::size_t>{}, std::vector<corpus::Span>{}, 512), ContractError);
}

TEST_CASE("encode_with_cls shapes") {
  const auto ex = toy_example(true);
  const auto vocab = vocab_for(ex);
  const PkeModel model(tiny_config(vocab.size()), 1);
  const auto enc = model.encode_with_cls(vocab.encode(ex.tokens), ex.sentences, {});
  CHECK(enc.cls_vectors.shape() == Shape{4, 8});
  CHECK(enc.states.rows() == ex.tokens.size() + 2 * 4);
  for (std::size_t i = 1; i < enc.marked.alignment.size(); ++i) CHECK(enc.marked.alignment[i] > enc.marked.alignment[i - 1]);
}

TEST_CASE("sentence scores") {
  const auto ex = toy_example(true);
  const auto vocab = vocab_for(ex);
  PkeModel model(tiny_config(vocab.size()), 2);
  const auto enc = model.encode_with_cls(vocab.encode(ex.tokens), ex.sentences, {});
  const Tensor scores = model.score_sentences(enc.cls_vectors, {});
  CHECK(scores.shape() == Shape{4, 1});
  for (double s : scores.data()) CHECK((s > 0.0 && s < 1.0));
  CHECK(model.score_sentences(slice_rows(enc.cls_vectors, 0, 1), {}).size() == 1);
  model.head_params().assign("filter.score_weight", std::vector<double>(8, 0.0));
  const Tensor flat = model.score_sentences(enc.cls_vectors, {});
  for (double s : flat.data()) CHECK(s == 0.5);
}

TEST_CASE("pke loss without positive sentences is the filter loss alone") {
  const auto ex = toy_example(false);
  REQUIRE(std::count(ex.sentence_labels.begin(), ex.sentence_labels.end(), 1) == 0);
  const auto vocab = vocab_for(ex);
  const PkeModel model(tiny_config(vocab.size()), 3);
  const auto enc = model.encode_with_cls(vocab.encode(ex.tokens), ex.sentences, {});
  const double lf = filter_loss(model.score_sentences(enc.cls_vectors, {}), ex.sentence_labels).item();
  CHECK(model.loss(ex, vocab, {}).item() == lf);
}

TEST_CASE("pke loss is finite, non-negative and has correct gradients") {
  const auto ex = toy_example(true);
  const auto vocab = vocab_for(ex);
  for (bool crf : {true, false}) {
    for (bool filter : {true, false}) {
      PkeConfig c = tiny_config(vocab.size());
      c.use_crf = crf;
      c.filter_enabled = filter;
      const PkeModel model(c, 4);
      const double l = model.loss(ex, vocab, {}).item();
      CHECK(std::isfinite(l));
      CHECK(l >= 0.0);
    }
  }
  // two sentences
  corpus::RawDocument doc;
  doc.title = "graph kernels";
  doc.abstract = "kernels compare graphs";
  doc.keyphrases = {"graph kernels"};
  const auto two = corpus::prepare_example(doc);
  REQUIRE(two.sentences.size() == 2);
  const PkeModel model(tiny_config(vocab_for(two).size()), 5);
  const auto v2 = vocab_for(two);
  std::vector<Tensor> leaves;
  for (const auto& [name, t] : model.all_params()) {
    if (name.find(".key.bias") == std::string::npos) leaves.push_back(t);
  }
  CHECK(finite_diff_check([&] { return model.loss(two, v2, {}); }, leaves, 1e-4, 4) <= 1e-4);
}

TEST_CASE("pke predictions are contiguous phrases of selected sentences") {
  const auto ex = toy_example(true);
  const auto vocab = vocab_for(ex);
  PkeConfig c = tiny_config(vocab.size());
  // bias emissions toward B then I so spans appear
  const PkeModel model(c, 6);
  auto& heads = const_cast<ad::ParamStore&>(model.head_params());
  heads.assign("tagger.emission.bias", std::vector<double>{0.0, 0.6, 0.5});
  for (std::size_t k : {1u, 2u, 7u}) {
    const auto pred = model.predict(ex, vocab, k);
    CHECK(pred.selected.size() == std::min<std::size_t>(k, 4));
    for (const auto& phrase : pred.phrases) {
      const bool inside = std::any_of(pred.selected.begin(), pred.selected.end(), [&](std::size_t s) {
        const auto span = ex.sentences[s];
        return phrase.position >= span.begin && phrase.position + phrase.tokens.size() <= span.end;
      });
      CHECK(inside);
      CHECK(std::equal(phrase.tokens.begin(), phrase.tokens.end(), ex.tokens.begin() + phrase.position));
    }
    for (std::size_t i = 1; i < pred.phrases.size(); ++i) CHECK(pred.phrases[i].position > pred.phrases[i - 1].position);
  }
}

TEST_CASE("sentence tagging does not depend on which other sentences are selected") {
  const auto ex = toy_example(true);
  const auto vocab = vocab_for(ex);
  const PkeModel model(tiny_config(vocab.size()), 7);
  const auto all = model.predict(ex, vocab, 7);
  const auto one = model.predict(ex, vocab, 1);
  REQUIRE(one.selected.size() == 1);
  const auto span = ex.sentences[one.selected[0]];
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    if (i >= span.begin && i < span.end) {
      CHECK(one.tags[i] == all.tags[i]);
    } else {
      CHECK(one.tags[i] == corpus::Tag::O);
    }
  }
}

TEST_CASE("ablation switches") {
  const auto ex = toy_example(true);
  const auto vocab = vocab_for(ex);
  PkeConfig c = tiny_config(vocab.size());
  c.filter_enabled = false;
  c.top_k = 1;
  CHECK(PkeModel(c, 8).predict(ex, vocab).selected == std::vector<std::size_t>{0, 1, 2, 3});
  c.filter_enabled = true;
  c.use_crf = false;
  const PkeModel linear(c, 8);
  const auto pred = linear.predict(ex, vocab, 7);
  const auto enc = linear.encode_with_cls(vocab.encode(ex.tokens), ex.sentences, {});
  std::vector<std::size_t> rows;
  for (std::size_t i = ex.sentences[0].begin; i < ex.sentences[0].end; ++i) rows.push_back(enc.marked.alignment[i]);
  const auto expected = argmax_tags(linear.emissions(gather_rows(enc.states, rows)));
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(static_cast<std::size_t>(pred.tags[i]) == expected[i]);
}
