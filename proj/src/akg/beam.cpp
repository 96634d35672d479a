#include "kpj/akg/beam.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kpj/core/errors.hpp"

namespace kpj::akg {

double normalized_score(double log_prob, std::size_t content_tokens, bool ended_with_eos) {
  const std::size_t count = content_tokens + (ended_with_eos ? 1 : 0);
  return count == 0 ? log_prob : log_prob / static_cast<double>(count);
}

namespace {

bool better_candidate(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

std::string id_key(std::span<const std::size_t> tokens) {
  std::string key;
  for (auto t : tokens) key += std::to_string(t) + ' ';
  return key;
}

}  // namespace

std::vector<RankedPhrase> beam_search(const StepFunction& step, std::size_t eos, const BeamConfig& config,
                                      const SurfaceFunction& surface) {
  if (config.width == 0 || config.depth == 0) throw ContractError("beam width and depth must be >= 1");
  std::vector<BeamHypothesis> live{BeamHypothesis{}};
  std::vector<RankedPhrase> finished;

  for (std::size_t round = 0; round < config.depth && !live.empty(); ++round) {
    std::vector<BeamHypothesis> candidates;
    for (const auto& hyp : live) {
      const auto log_probs = step(hyp.tokens);
      for (std::size_t v = 0; v < log_probs.size(); ++v) {
        if (!std::isfinite(log_probs[v])) continue;
        BeamHypothesis next{hyp.tokens, hyp.log_prob + log_probs[v], false};
        next.tokens.push_back(v);
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better_candidate);
    if (candidates.size() > config.width) candidates.resize(config.width);

    live.clear();
    for (auto& c : candidates) {
      const bool ended = c.tokens.back() == eos;
      if (ended) c.tokens.pop_back();
      if (ended || c.tokens.size() >= config.depth) {
        if (!c.tokens.empty()) {
          finished.push_back({c.tokens, normalized_score(c.log_prob, c.tokens.size(), ended), c.log_prob});
        }
      } else {
        live.push_back(std::move(c));
      }
    }
  }

  std::stable_sort(finished.begin(), finished.end(), [](const RankedPhrase& a, const RankedPhrase& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  std::vector<RankedPhrase> out;
  std::map<std::string, bool> seen;
  for (auto& p : finished) {
    const std::string key = surface ? surface(p.tokens) : id_key(p.tokens);
    if (!seen.emplace(key, true).second) continue;
    out.push_back(std::move(p));
    if (out.size() == config.width) break;
  }
  return out;
}

}  // namespace kpj::akg
