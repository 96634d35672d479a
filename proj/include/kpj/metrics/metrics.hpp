#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpj/corpus/text.hpp"

namespace kpj::metrics {

using corpus::Tokens;

struct MatchOptions {
  bool stem = false;
  bool dedup = true;
};

struct EvalConfig {
  std::vector<std::size_t> ks{5, 10};
  std::size_t recall_k = 50;
  MatchOptions match;

  void validate() const;
};

struct DocScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t used = 0;
  std::size_t correct = 0;
  std::size_t gold = 0;
};

/// Normalizes each phrase, optionally stems every token, and drops empty
/// phrases (and repeats, under dedup). Order is preserved.
std::vector<Tokens> prepare(std::span<const std::string> phrases, const MatchOptions& opts);

/// One flag per prepared prediction: does it equal some prepared gold phrase.
std::vector<bool> match(std::span<const std::string> preds, std::span<const std::string> gold,
                        const MatchOptions& opts = {});

double harmonic_mean(double p, double r);

/// nullopt when the gold set is empty (document skipped).
std::optional<DocScore> f1_at_k(std::span<const std::string> preds, std::span<const std::string> gold,
                                std::size_t k, const MatchOptions& opts = {});
std::optional<DocScore> f1_at_m(std::span<const std::string> preds, std::span<const std::string> gold,
                                const MatchOptions& opts = {});
std::optional<double> recall_at_k(std::span<const std::string> preds, std::span<const std::string> gold,
                                  std::size_t k = 50, const MatchOptions& opts = {});

struct MacroScore {
  std::optional<double> value;  // undefined when every document was skipped
  std::size_t documents = 0;
  std::size_t skipped = 0;
};

MacroScore macro_average(std::span<const std::optional<double>> scores);

struct MacroDocScore {
  MacroScore precision, recall, f1;
};

MacroDocScore macro_average(std::span<const std::optional<DocScore>> scores);

}  // namespace kpj::metrics
