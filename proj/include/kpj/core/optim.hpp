#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kpj/core/tensor.hpp"

namespace kpj::ad {

enum class LrSchedule { constant, inverse_sqrt };

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.998;
  double epsilon = 1e-9;
  std::int64_t warmup_steps = 1000;
  double clip_norm = 2.0;
  LrSchedule schedule = LrSchedule::constant;
};

struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Linear warm-up over `warmup_steps`, then constant (or 1/sqrt decay).
double effective_lr(const AdamConfig& config, std::int64_t step) noexcept;

/// Euclidean norm over all accumulated gradients.
double global_grad_norm(const NamedParams& params);

/// Scales every gradient by min(1, max_norm / norm). Returns the factor.
double clip_grad_norm(NamedParams& params, double max_norm);

OptimizerState make_optimizer_state(const AdamConfig& config, const NamedParams& params);

/// One clipped, warmed-up Adam update with bias correction. Parameters with
/// no accumulated gradient are left untouched. Throws NumericError naming
/// the first parameter whose gradient is not finite. Increments `step`.
void adam_step(NamedParams& params, OptimizerState& state);

}  // namespace kpj::ad
