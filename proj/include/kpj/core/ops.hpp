#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kpj/core/tensor.hpp"

namespace kpj::ad {

// Every primitive treats rank-1 tensors of length n as 1 x n rows and
// rank-0 tensors as 1 x 1. Results are rank 2 unless noted.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// x[m,n] + bias[n], broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);
/// x[m,n] * s[m,1], each row scaled by its own entry.
Tensor mul_col(const Tensor& x, const Tensor& s);
/// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// tanh approximation of GELU.
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);
/// Natural log of max(x, floor); the gradient is zero where clamped.
Tensor log(const Tensor& x, double floor = 0.0);

/// Softmax along `axis` (0 = down columns, 1 = along rows) of a matrix.
Tensor softmax(const Tensor& x, int axis = 1);

/// Row-wise softmax where `allowed[r * cols + c] == 0` excludes an entry
/// (treated as -inf). Excluded entries get exactly zero probability. Every
/// row needs at least one allowed entry.
Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> allowed);

/// Row-wise log-softmax.
Tensor log_softmax_rows(const Tensor& x);

/// Per-row normalisation to zero mean / unit variance, then gamma * . + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);

/// Rows of `table` selected by `ids`.
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);
/// Same as embedding(); reads as "pick these rows".
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// out[r] = x[r, index[r]]; returns a column [m,1].
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> index);
/// out[r, index[c]] += x[r, c]; result is [m, width].
Tensor scatter_cols(const Tensor& x, std::span<const std::size_t> index, std::size_t width);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

/// Sum of all entries (scalar).
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Inner product of two equally sized tensors (scalar).
Tensor dot(const Tensor& a, const Tensor& b);
/// Mean of several equally shaped tensors.
Tensor average(std::span<const Tensor> parts);

/// Inverted dropout. Identity when `rate == 0` or `rng == nullptr`.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64* rng);

}  // namespace kpj::ad
