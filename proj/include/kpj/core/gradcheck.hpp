#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "kpj/core/tensor.hpp"

namespace kpj::ad {

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). Returns
/// max_i |a - n| / max(|a|, |n|, 1e-8). Runs in f64 precision.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps = 1e-4);

/// Same check over several leaves at once (model parameters). `f` must
/// rebuild its graph from the current values of `leaves` on every call.
/// When `max_coords` is non-zero, at most that many coordinates per leaf are
/// probed, spread evenly.
double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                         double eps = 1e-4, std::size_t max_coords = 0);

}  // namespace kpj::ad
