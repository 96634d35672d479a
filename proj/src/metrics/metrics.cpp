#include "kpj/metrics/metrics.hpp"

#include <algorithm>
#include <set>

#include "kpj/core/errors.hpp"
#include "kpj/metrics/stemmer.hpp"

namespace kpj::metrics {

void EvalConfig::validate() const {
  for (auto k : ks)
    if (k == 0) throw ConfigError("k values must be positive");
  if (recall_k == 0) throw ConfigError("recall cutoff must be positive");
}

std::vector<Tokens> prepare(std::span<const std::string> phrases, const MatchOptions& opts) {
  std::vector<Tokens> out;
  std::set<Tokens> seen;
  for (const auto& phrase : phrases) {
    Tokens toks = corpus::normalize(phrase);
    if (toks.empty()) continue;
    if (opts.stem)
      for (auto& t : toks) t = porter_stem(t);
    if (opts.dedup && !seen.insert(toks).second) continue;
    out.push_back(std::move(toks));
  }
  return out;
}

namespace {

std::vector<bool> match_prepared(const std::vector<Tokens>& preds, const std::vector<Tokens>& gold) {
  const std::set<Tokens> gold_set(gold.begin(), gold.end());
  std::vector<bool> hits;
  hits.reserve(preds.size());
  for (const auto& p : preds) hits.push_back(gold_set.count(p) > 0);
  return hits;
}

std::optional<DocScore> score_top(const std::vector<Tokens>& preds, const std::vector<Tokens>& gold, std::size_t k) {
  if (gold.empty()) return std::nullopt;
  DocScore s;
  s.gold = gold.size();
  s.used = std::min(k, preds.size());
  const std::vector<Tokens> top(preds.begin(), preds.begin() + static_cast<std::ptrdiff_t>(s.used));
  const auto hits = match_prepared(top, gold);
  s.correct = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), true));
  if (s.used == 0) return s;
  s.precision = static_cast<double>(s.correct) / static_cast<double>(s.used);
  s.recall = static_cast<double>(s.correct) / static_cast<double>(s.gold);
  s.f1 = harmonic_mean(s.precision, s.recall);
  return s;
}

}  // namespace

std::vector<bool> match(std::span<const std::string> preds, std::span<const std::string> gold,
                        const MatchOptions& opts) {
  return match_prepared(prepare(preds, opts), prepare(gold, opts));
}

double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::optional<DocScore> f1_at_k(std::span<const std::string> preds, std::span<const std::string> gold,
                                std::size_t k, const MatchOptions& opts) {
  if (k == 0) throw ContractError("f1_at_k needs k >= 1");
  return score_top(prepare(preds, opts), prepare(gold, opts), k);
}

std::optional<DocScore> f1_at_m(std::span<const std::string> preds, std::span<const std::string> gold,
                                const MatchOptions& opts) {
  const auto p = prepare(preds, opts);
  return score_top(p, prepare(gold, opts), p.size());
}

std::optional<double> recall_at_k(std::span<const std::string> preds, std::span<const std::string> gold,
                                  std::size_t k, const MatchOptions& opts) {
  if (k == 0) throw ContractError("recall_at_k needs k >= 1");
  const auto s = score_top(prepare(preds, opts), prepare(gold, opts), k);
  if (!s) return std::nullopt;
  return s->recall;
}

MacroScore macro_average(std::span<const std::optional<double>> scores) {
  MacroScore m;
  double total = 0.0;
  for (const auto& s : scores) {
    if (!s) {
      ++m.skipped;
      continue;
    }
    total += *s;
    ++m.documents;
  }
  if (m.documents > 0) m.value = total / static_cast<double>(m.documents);
  return m;
}

MacroDocScore macro_average(std::span<const std::optional<DocScore>> scores) {
  std::vector<std::optional<double>> p, r, f;
  for (const auto& s : scores) {
    p.push_back(s ? std::optional<double>(s->precision) : std::nullopt);
    r.push_back(s ? std::optional<double>(s->recall) : std::nullopt);
    f.push_back(s ? std::optional<double>(s->f1) : std::nullopt);
  }
  return {macro_average(p), macro_average(r), macro_average(f)};
}

}  // namespace kpj::metrics
