#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kpj/core/tensor.hpp"

namespace kpj::pke {

using ad::Tensor;

// Linear-chain CRF over T tags. Transition matrices are (T+2) x (T+2): row
// and column T is the virtual start state, T+1 the virtual stop state.
// Entries into start and out of stop are never read (they act as -inf).

inline std::size_t crf_start(std::size_t tags) { return tags; }
inline std::size_t crf_stop(std::size_t tags) { return tags + 1; }

/// s(x, t): start->t_0, t_i->t_{i+1}, t_{n-1}->stop transitions plus the
/// emission of every chosen tag.
double crf_path_score(const Tensor& emissions, const Tensor& transitions,
                      std::span<const std::size_t> path);

/// log Z by the forward algorithm in log space.
double crf_log_partition(const Tensor& emissions, const Tensor& transitions);

/// -s(x, gold) + log Z. Gradients w.r.t. emissions and transitions are the
/// forward-backward marginals minus the gold indicators.
Tensor crf_nll(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> gold);

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

/// Highest-scoring path; ties resolve toward the lower tag index.
ViterbiResult viterbi_decode(const Tensor& emissions, const Tensor& transitions);

/// Per-token softmax cross-entropy (summed) for the linear-tagger ablation.
Tensor token_cross_entropy(const Tensor& emissions, std::span<const std::size_t> gold);

/// Per-token argmax, ties toward the lower index.
std::vector<std::size_t> argmax_tags(const Tensor& emissions);

}  // namespace kpj::pke
