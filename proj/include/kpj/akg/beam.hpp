#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace kpj::akg {

struct BeamConfig {
  std::size_t width = 16;
  std::size_t depth = 6;  // content tokens; end-of-sequence not counted
};

struct BeamHypothesis {
  std::vector<std::size_t> tokens;  // generated ids, may end with EOS
  double log_prob = 0.0;
  bool finished = false;
};

struct RankedPhrase {
  std::vector<std::size_t> tokens;  // without EOS
  double score = 0.0;               // log_prob / generated token count (EOS included)
  double log_prob = 0.0;
};

/// Log-probabilities of the next token given the generated prefix (start
/// symbol excluded). -inf marks forbidden tokens.
using StepFunction = std::function<std::vector<double>(std::span<const std::size_t> prefix)>;

/// Surface key for deduplication; defaults to the id sequence.
using SurfaceFunction = std::function<std::string(std::span<const std::size_t> tokens)>;

/// Width-bounded breadth search. Each round expands every live hypothesis,
/// keeps the `width` best candidates by accumulated log-probability, and
/// retires those ending in `eos` or reaching `depth` content tokens. Final
/// ranking is by length-normalised log-probability (stable on ties by token
/// ids); empty phrases are dropped and repeated surfaces keep their best
/// score. At most `width` phrases are returned.
std::vector<RankedPhrase> beam_search(const StepFunction& step, std::size_t eos, const BeamConfig& config,
                                      const SurfaceFunction& surface = {});

/// Normalised score used for ranking.
double normalized_score(double log_prob, std::size_t content_tokens, bool ended_with_eos);

}  // namespace kpj::akg
