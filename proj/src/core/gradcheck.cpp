#include "kpj/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace kpj::ad {

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps) {
  PrecisionScope precise(Precision::f64);
  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  return finite_diff_check([&] { return f(leaf); }, {leaf}, eps, 0);
}

double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double eps,
                         std::size_t max_coords) {
  PrecisionScope precise(Precision::f64);
  std::vector<bool> saved_flags;
  for (auto& leaf : leaves) {
    saved_flags.push_back(leaf.requires_grad());
    leaf.set_requires_grad(true);
    leaf.clear_grad();
  }
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) analytic.push_back(leaf.grad());

  double worst = 0.0;
  {
    NoGradScope no_grad;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      auto values = leaves[k].mutable_data();
      const std::size_t n = values.size();
      const std::size_t probes = max_coords == 0 ? n : std::min(n, max_coords);
      for (std::size_t p = 0; p < probes; ++p) {
        const std::size_t i = probes == n ? p : (p * n) / probes;
        const double orig = values[i];
        values[i] = orig + eps;
        const double up = f().item();
        values[i] = orig - eps;
        const double down = f().item();
        values[i] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[k][i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
    }
  }
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    leaves[k].clear_grad();
    leaves[k].set_requires_grad(saved_flags[k]);
  }
  return worst;
}

}  // namespace kpj::ad
