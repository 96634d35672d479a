#include "kpj/pke/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kpj/core/errors.hpp"
#include "kpj/core/ops.hpp"

namespace kpj::pke {

namespace {

struct CrfShape {
  std::size_t n;
  std::size_t tags;
};

CrfShape check_shapes(const Tensor& emissions, const Tensor& transitions) {
  const std::size_t n = emissions.rows();
  const std::size_t tags = emissions.cols();
  if (n == 0 || emissions.size() == 0) throw ContractError("CRF over an empty sequence");
  if (transitions.rows() != tags + 2 || transitions.cols() != tags + 2) {
    throw DimensionError("CRF transitions must be " + std::to_string(tags + 2) + "x" +
                         std::to_string(tags + 2) + ", got " + ad::shape_string(transitions.shape()));
  }
  return {n, tags};
}

double log_sum_exp(std::span<const double> xs) {
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

// alpha[i*T + j]: log-sum of all prefixes ending in tag j at position i.
std::vector<double> forward_scores(std::span<const double> em, std::span<const double> tr, CrfShape s) {
  const std::size_t T = s.tags, W = T + 2, start = crf_start(T);
  std::vector<double> alpha(s.n * T);
  std::vector<double> terms(T);
  for (std::size_t j = 0; j < T; ++j) alpha[j] = tr[start * W + j] + em[j];
  for (std::size_t i = 1; i < s.n; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      for (std::size_t k = 0; k < T; ++k) terms[k] = alpha[(i - 1) * T + k] + tr[k * W + j];
      alpha[i * T + j] = log_sum_exp(terms) + em[i * T + j];
    }
  }
  return alpha;
}

// beta[i*T + j]: log-sum of all suffixes after tag j at position i (incl. stop).
std::vector<double> backward_scores(std::span<const double> em, std::span<const double> tr, CrfShape s) {
  const std::size_t T = s.tags, W = T + 2, stop = crf_stop(T);
  std::vector<double> beta(s.n * T);
  std::vector<double> terms(T);
  for (std::size_t j = 0; j < T; ++j) beta[(s.n - 1) * T + j] = tr[j * W + stop];
  for (std::size_t i = s.n - 1; i-- > 0;) {
    for (std::size_t j = 0; j < T; ++j) {
      for (std::size_t k = 0; k < T; ++k) terms[k] = tr[j * W + k] + em[(i + 1) * T + k] + beta[(i + 1) * T + k];
      beta[i * T + j] = log_sum_exp(terms);
    }
  }
  return beta;
}

double partition_from_alpha(std::span<const double> alpha, std::span<const double> tr, CrfShape s) {
  const std::size_t T = s.tags, W = T + 2, stop = crf_stop(T);
  std::vector<double> terms(T);
  for (std::size_t j = 0; j < T; ++j) terms[j] = alpha[(s.n - 1) * T + j] + tr[j * W + stop];
  return log_sum_exp(terms);
}

}  // namespace

double crf_path_score(const Tensor& emissions, const Tensor& transitions,
                      std::span<const std::size_t> path) {
  const CrfShape s = check_shapes(emissions, transitions);
  if (path.size() != s.n) throw ContractError("CRF path length does not match the sequence");
  const auto em = emissions.data();
  const auto tr = transitions.data();
  const std::size_t T = s.tags, W = T + 2;
  double score = tr[crf_start(T) * W + path[0]];
  for (std::size_t i = 0; i < s.n; ++i) {
    if (path[i] >= T) throw ContractError("CRF tag index out of range");
    score += em[i * T + path[i]];
    if (i + 1 < s.n) score += tr[path[i] * W + path[i + 1]];
  }
  return score + tr[path[s.n - 1] * W + crf_stop(T)];
}

double crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
  const CrfShape s = check_shapes(emissions, transitions);
  const auto alpha = forward_scores(emissions.data(), transitions.data(), s);
  return partition_from_alpha(alpha, transitions.data(), s);
}

Tensor crf_nll(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> gold) {
  const CrfShape s = check_shapes(emissions, transitions);
  const double gold_score = crf_path_score(emissions, transitions, gold);
  const auto alpha = forward_scores(emissions.data(), transitions.data(), s);
  const double log_z = partition_from_alpha(alpha, transitions.data(), s);
  std::vector<std::size_t> path(gold.begin(), gold.end());

  return ad::make_op(
      "crf_nll", {}, {log_z - gold_score}, {emissions, transitions},
      [s, path = std::move(path), log_z](ad::Node& self) {
        const std::size_t T = s.tags, W = T + 2, start = crf_start(T), stop = crf_stop(T);
        const auto& em = self.inputs[0]->value;
        const auto& tr = self.inputs[1]->value;
        const double g = self.grad[0];
        const auto alpha = forward_scores(em, tr, s);
        const auto beta = backward_scores(em, tr, s);
        ad::Node& em_node = *self.inputs[0];
        ad::Node& tr_node = *self.inputs[1];
        if (em_node.requires_grad) {
          auto& ge = em_node.ensure_grad();
          for (std::size_t i = 0; i < s.n; ++i) {
            for (std::size_t j = 0; j < T; ++j) {
              const double marginal = std::exp(alpha[i * T + j] + beta[i * T + j] - log_z);
              ge[i * T + j] += g * marginal;
            }
            ge[i * T + path[i]] -= g;
          }
        }
        if (tr_node.requires_grad) {
          auto& gt = tr_node.ensure_grad();
          for (std::size_t j = 0; j < T; ++j) {
            gt[start * W + j] += g * std::exp(alpha[j] + beta[j] - log_z);
            gt[j * W + stop] += g * std::exp(alpha[(s.n - 1) * T + j] + beta[(s.n - 1) * T + j] - log_z);
          }
          for (std::size_t i = 0; i + 1 < s.n; ++i) {
            for (std::size_t a = 0; a < T; ++a) {
              for (std::size_t b = 0; b < T; ++b) {
                const double pair = alpha[i * T + a] + tr[a * W + b] + em[(i + 1) * T + b] +
                                    beta[(i + 1) * T + b] - log_z;
                gt[a * W + b] += g * std::exp(pair);
              }
            }
          }
          gt[start * W + path[0]] -= g;
          gt[path[s.n - 1] * W + stop] -= g;
          for (std::size_t i = 0; i + 1 < s.n; ++i) gt[path[i] * W + path[i + 1]] -= g;
        }
      });
}

ViterbiResult viterbi_decode(const Tensor& emissions, const Tensor& transitions) {
  const CrfShape s = check_shapes(emissions, transitions);
  const auto em = emissions.data();
  const auto tr = transitions.data();
  const std::size_t T = s.tags, W = T + 2;
  std::vector<double> best(s.n * T);
  std::vector<std::size_t> back(s.n * T, 0);
  for (std::size_t j = 0; j < T; ++j) best[j] = tr[crf_start(T) * W + j] + em[j];
  for (std::size_t i = 1; i < s.n; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      std::size_t arg = 0;
      double top = best[(i - 1) * T] + tr[j];
      for (std::size_t k = 1; k < T; ++k) {
        const double v = best[(i - 1) * T + k] + tr[k * W + j];
        if (v > top) {
          top = v;
          arg = k;
        }
      }
      best[i * T + j] = top + em[i * T + j];
      back[i * T + j] = arg;
    }
  }
  std::size_t last = 0;
  double top = best[(s.n - 1) * T] + tr[crf_stop(T)];
  for (std::size_t j = 1; j < T; ++j) {
    const double v = best[(s.n - 1) * T + j] + tr[j * W + crf_stop(T)];
    if (v > top) {
      top = v;
      last = j;
    }
  }
  ViterbiResult out;
  out.score = top;
  out.path.assign(s.n, 0);
  out.path[s.n - 1] = last;
  for (std::size_t i = s.n - 1; i > 0; --i) out.path[i - 1] = back[i * T + out.path[i]];
  return out;
}

Tensor token_cross_entropy(const Tensor& emissions, std::span<const std::size_t> gold) {
  if (gold.size() != emissions.rows()) throw ContractError("token_cross_entropy: one label per row required");
  const Tensor picked = ad::gather_cols(ad::log_softmax_rows(emissions), gold);
  return ad::affine(ad::sum(picked), -1.0, 0.0);
}

std::vector<std::size_t> argmax_tags(const Tensor& emissions) {
  const std::size_t n = emissions.rows(), T = emissions.cols();
  const auto em = emissions.data();
  std::vector<std::size_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < T; ++j)
      if (em[i * T + j] > em[i * T + out[i]]) out[i] = j;
  }
  return out;
}

}  // namespace kpj::pke
