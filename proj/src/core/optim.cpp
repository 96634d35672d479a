#include "kpj/core/optim.hpp"

#include <algorithm>
#include <cmath>

#include "kpj/core/errors.hpp"

namespace kpj::ad {

double effective_lr(const AdamConfig& config, std::int64_t step) noexcept {
  const double s = static_cast<double>(step + 1);
  const double warm = static_cast<double>(std::max<std::int64_t>(config.warmup_steps, 1));
  if (config.schedule == LrSchedule::inverse_sqrt) {
    return config.base_lr * std::min(s / warm, std::sqrt(warm / s));
  }
  return config.base_lr * std::min(1.0, s / warm);
}

double global_grad_norm(const NamedParams& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    for (double g : p.node().grad) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(NamedParams& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm <= 0.0 || norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (auto& [name, p] : params) {
    for (double& g : p.node().grad) g *= factor;
  }
  return factor;
}

OptimizerState make_optimizer_state(const AdamConfig& config, const NamedParams& params) {
  OptimizerState state;
  state.config = config;
  for (const auto& [name, p] : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(NamedParams& params, OptimizerState& state) {
  if (state.first_moment.size() != params.size()) {
    throw ContractError("optimizer state was built for " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (const auto& [name, p] : params) {
    for (double g : p.node().grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + name + "'");
    }
  }
  const auto& cfg = state.config;
  clip_grad_norm(params, cfg.clip_norm);

  const double lr = effective_lr(cfg, state.step);
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Node& node = params[k].second.node();
    if (node.grad.empty()) continue;
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != node.value.size()) throw ContractError("optimizer moment shape mismatch");
    for (std::size_t i = 0; i < node.value.size(); ++i) {
      const double g = node.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      node.value[i] = round_to_precision(node.value[i] - lr * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
  }
  ++state.step;
}

}  // namespace kpj::ad
