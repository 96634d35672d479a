#include <doctest.h>

#include <string>
#include <utility>
#include <vector>

#include "kpj/core/errors.hpp"
#include "kpj/metrics/metrics.hpp"
#include "kpj/metrics/stemmer.hpp"

using namespace kpj;
using namespace kpj::metrics;

namespace {

using Phrases = std::vector<std::string>;

// digit-free so normalization keeps names distinct
std::string name(int i) { return std::string("w") + static_cast<char>('a' + i / 26) + static_cast<char>('a' + i % 26); }

std::vector<std::optional<double>> opt(std::initializer_list<std::optional<double>> xs) { return xs; }

}  // namespace

TEST_CASE("porter stemmer on the published examples") {
  const std::vector<std::pair<const char*, const char*>> cases{
      {"caresses", "caress"},     {"ponies", "poni"},           {"ties", "ti"},
      {"caress", "caress"},       {"cats", "cat"},              {"feed", "feed"},
      {"agreed", "agre"},         {"plastered", "plaster"},     {"bled", "bled"},
      {"motoring", "motor"},      {"sing", "sing"},             {"conflated", "conflat"},
      {"troubled", "troubl"},     {"sized", "size"},            {"hopping", "hop"},
      {"tanned", "tan"},          {"falling", "fall"},          {"hissing", "hiss"},
      {"fizzed", "fizz"},         {"failing", "fail"},          {"filing", "file"},
      {"happy", "happi"},         {"sky", "sky"},               {"relational", "relat"},
      {"conditional", "condit"},  {"rational", "ration"},       {"valenci", "valenc"},
      {"hesitanci", "hesit"},     {"digitizer", "digit"},       {"conformabli", "conform"},
      {"radicalli", "radic"},     {"differentli", "differ"},    {"vileli", "vile"},
      {"analogousli", "analog"},  {"vietnamization", "vietnam"}, {"predication", "predic"},
      {"operator", "oper"},       {"feudalism", "feudal"},      {"decisiveness", "decis"},
      {"hopefulness", "hope"},    {"callousness", "callous"},   {"formaliti", "formal"},
      {"sensitiviti", "sensit"},  {"sensibiliti", "sensibl"},   {"triplicate", "triplic"},
      {"formative", "form"},      {"formalize", "formal"},      {"electriciti", "electr"},
      {"electrical", "electr"},   {"hopeful", "hope"},          {"goodness", "good"},
      {"revival", "reviv"},       {"allowance", "allow"},       {"inference", "infer"},
      {"airliner", "airlin"},     {"gyroscopic", "gyroscop"},   {"adjustable", "adjust"},
      {"defensible", "defens"},   {"irritant", "irrit"},        {"replacement", "replac"},
      {"adjustment", "adjust"},   {"dependent", "depend"},      {"adoption", "adopt"},
      {"homologou", "homolog"},   {"communism", "commun"},      {"activate", "activ"},
      {"angulariti", "angular"},  {"homologous", "homolog"},    {"effective", "effect"},
      {"bowdlerize", "bowdler"},  {"probate", "probat"},        {"rate", "rate"},
      {"cease", "ceas"},          {"controll", "control"},      {"roll", "roll"},
      {"generalization", "gener"}, {"oscillators", "oscil"},    {"machines", "machin"},
  };
  for (const auto& [word, stem] : cases) {
    INFO(word);
    CHECK(porter_stem(word) == stem);
  }
  CHECK(porter_stem("as") == "as");
  CHECK(porter_stem("<digit>") == "<digit>");
}

TEST_CASE("match normalizes, deduplicates and optionally stems") {
  CHECK(match(Phrases{"Abstract Machines"}, Phrases{"abstract machines"}) == std::vector<bool>{true});
  CHECK(match(Phrases{"a b", "A  B", "c"}, Phrases{"a b"}) == std::vector<bool>{true, false});
  CHECK(match(Phrases{"a b", "A  B"}, Phrases{"a b"}, {false, false}) == std::vector<bool>{true, true});
  CHECK(match(Phrases{"machine"}, Phrases{"machines"}) == std::vector<bool>{false});
  CHECK(match(Phrases{"machine"}, Phrases{"machines"}, {true, true}) == std::vector<bool>{true});
  CHECK(prepare(Phrases{"", "  ", "x"}, {}).size() == 1);
}

TEST_CASE("F1@k golden case") {
  const Phrases gold{"ga", "gb", "gc", "gd"};
  const auto s = f1_at_k(Phrases{"ga", "xa", "gb", "xb", "xc", "gc"}, gold, 5);
  REQUIRE(s);
  CHECK(s->precision == doctest::Approx(0.4));
  CHECK(s->recall == doctest::Approx(0.5));
  CHECK(s->f1 == doctest::Approx(0.4444).epsilon(1e-4));
  CHECK(s->used == 5);
  CHECK(s->correct == 2);

  CHECK(f1_at_k(gold, gold, 4)->f1 == 1.0);
  CHECK(f1_at_k(Phrases{"x"}, gold, 5)->f1 == 0.0);
  CHECK_FALSE(f1_at_k(Phrases{"x"}, Phrases{}, 5));
  CHECK_THROWS_AS(f1_at_k(Phrases{"x"}, gold, 0), ContractError);
  // fewer predictions than k: precision over what was predicted
  const auto short_list = f1_at_k(Phrases{"ga"}, gold, 5);
  CHECK(short_list->used == 1);
  CHECK(short_list->precision == 1.0);
}

TEST_CASE("F1@M golden case") {
  const Phrases gold{"a", "b", "c", "d", "e", "f"};
  const auto s = f1_at_m(Phrases{"a", "b", "c", "d", "e", "z"}, gold);
  REQUIRE(s);
  CHECK(s->precision == doctest::Approx(5.0 / 6.0));
  CHECK(s->recall == doctest::Approx(5.0 / 6.0));
  CHECK(s->f1 == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(f1_at_m(gold, gold)->f1 == 1.0);
  const auto none = f1_at_m(Phrases{}, gold);
  CHECK(none->precision == 0.0);
  CHECK(none->recall == 0.0);
  CHECK(none->f1 == 0.0);
  const Phrases preds{"a", "q", "c"};
  CHECK(f1_at_m(preds, gold)->f1 == f1_at_k(preds, gold, preds.size())->f1);
}

TEST_CASE("R@50 golden cases") {
  Phrases preds;
  for (int i = 0; i < 60; ++i) preds.push_back(name(i));
  CHECK(recall_at_k(preds, Phrases{name(3), name(49)}, 50) == 1.0);
  CHECK(recall_at_k(preds, Phrases{name(3), "zz"}, 50) == 0.5);
  CHECK(recall_at_k(preds, Phrases{name(50)}, 50) == 0.0);
  CHECK(recall_at_k(preds, Phrases{name(50)}, 51) == 1.0);
  CHECK_FALSE(recall_at_k(preds, Phrases{}, 50));
  double last = 0.0;
  for (std::size_t k = 1; k <= 60; k += 7) {
    const double r = *recall_at_k(preds, Phrases{name(2), name(20), name(40), "x"}, k);
    CHECK(r >= last);
    last = r;
  }
}

TEST_CASE("metrics ignore gold order and predictions below the cutoff") {
  const Phrases gold{"a", "b", "c"};
  const Phrases reversed{"c", "b", "a"};
  const Phrases p1{"a", "x", "c", "b"};
  const Phrases p2{"a", "x", "y", "z"};
  CHECK(f1_at_k(p1, gold, 2)->f1 == f1_at_k(p1, reversed, 2)->f1);
  CHECK(f1_at_k(p1, gold, 2)->f1 == f1_at_k(p2, gold, 2)->f1);
}

TEST_CASE("scores stay within bounds") {
  const Phrases gold{"a", "b", "c"};
  for (const Phrases& p : {Phrases{"a"}, Phrases{"a", "b", "x", "y"}, Phrases{"x"}, Phrases{"a", "b", "c"}}) {
    for (std::size_t k : {1u, 3u, 10u}) {
      const auto s = *f1_at_k(p, gold, k);
      CHECK(s.precision >= 0.0);
      CHECK(s.precision <= 1.0);
      CHECK(s.recall <= 1.0);
      CHECK(s.f1 <= std::min(2 * s.precision, 2 * s.recall) + 1e-12);
    }
  }
}

TEST_CASE("macro average") {
  const auto half = macro_average(opt({1.0, 0.0}));
  CHECK(*half.value == 0.5);
  CHECK(*macro_average(opt({0.3})).value == 0.3);
  const auto skipped = macro_average(opt({1.0, std::nullopt, 0.0}));
  CHECK(*skipped.value == 0.5);
  CHECK(skipped.documents == 2);
  CHECK(skipped.skipped == 1);
  CHECK_FALSE(macro_average(opt({std::nullopt, std::nullopt})).value);

  const Phrases gold{"a", "b"};
  const std::vector<std::optional<DocScore>> docs{f1_at_m(Phrases{"a", "b"}, gold), f1_at_m(Phrases{"x"}, gold),
                                                  f1_at_m(Phrases{"x"}, Phrases{})};
  const auto m = macro_average(docs);
  CHECK(*m.f1.value == 0.5);
  CHECK(*m.precision.value == 0.5);
  CHECK(m.f1.skipped == 1);
}

TEST_CASE("eval config validation") {
  EvalConfig c;
  CHECK_NOTHROW(c.validate());
  c.ks = {5, 0};
  CHECK_THROWS(c.validate());
  c.ks = {5};
  c.recall_k = 0;
  CHECK_THROWS(c.validate());
}
