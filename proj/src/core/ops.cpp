#include "kpj/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kpj/core/errors.hpp"

namespace kpj::ad {

namespace {

struct Dims {
  std::size_t rows;
  std::size_t cols;
};

Dims dims(const Tensor& t) {
  const auto& s = t.shape();
  switch (s.size()) {
    case 0: return {1, 1};
    case 1: return {1, s[0]};
    case 2: return {s[0], s[1]};
    default: throw DimensionError("ops support rank <= 2, got " + shape_string(s));
  }
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  const Dims da = dims(a), db = dims(b);
  if (da.rows != db.rows || da.cols != db.cols) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Gradient buffer of input `i`, or nullptr when that input is a constant.
std::vector<double>* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df_from_xy) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_op(op, x.shape(), std::move(out), {x}, [df_from_xy](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xin = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*gx)[i] += self.grad[i] * df_from_xy(xin[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Dims da = dims(a), db = dims(b);
  if (da.cols != db.rows) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(a.shape()) +
                         " x " + shape_string(b.shape()));
  }
  const std::size_t m = da.rows, k = da.cols, n = db.cols;
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& g = self.grad;
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* ga = input_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g.data() + i * n;
          const double* brow = bv.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = input_grad(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb->data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const Dims d = dims(a);
  const auto av = a.data();
  std::vector<double> out(d.rows * d.cols);
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t j = 0; j < d.cols; ++j) out[j * d.rows + i] = av[i * d.cols + j];
  return make_op("transpose", {d.cols, d.rows}, std::move(out), {a}, [d](Node& self) {
    auto* ga = input_grad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) (*ga)[i * d.cols + j] += self.grad[j * d.rows + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = input_grad(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = input_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* g = input_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (auto* g = input_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  const Dims dx = dims(x);
  if (bias.size() != dx.cols) {
    throw DimensionError("add_row: bias " + shape_string(bias.shape()) + " does not fit " +
                         shape_string(x.shape()));
  }
  const auto xv = x.data(), bv = bias.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < dx.rows; ++r)
    for (std::size_t c = 0; c < dx.cols; ++c) out[r * dx.cols + c] = xv[r * dx.cols + c] + bv[c];
  return make_op("add_row", x.shape(), std::move(out), {x, bias}, [dx](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = input_grad(self, 1))
      for (std::size_t r = 0; r < dx.rows; ++r)
        for (std::size_t c = 0; c < dx.cols; ++c) (*g)[c] += self.grad[r * dx.cols + c];
  });
}

Tensor mul_col(const Tensor& x, const Tensor& s) {
  const Dims dx = dims(x);
  if (s.size() != dx.rows) {
    throw DimensionError("mul_col: scale " + shape_string(s.shape()) + " does not fit " +
                         shape_string(x.shape()));
  }
  const auto xv = x.data(), sv = s.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < dx.rows; ++r)
    for (std::size_t c = 0; c < dx.cols; ++c) out[r * dx.cols + c] = xv[r * dx.cols + c] * sv[r];
  return make_op("mul_col", x.shape(), std::move(out), {x, s}, [dx](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& sv = self.inputs[1]->value;
    if (auto* g = input_grad(self, 0))
      for (std::size_t r = 0; r < dx.rows; ++r)
        for (std::size_t c = 0; c < dx.cols; ++c)
          (*g)[r * dx.cols + c] += self.grad[r * dx.cols + c] * sv[r];
    if (auto* g = input_grad(self, 1))
      for (std::size_t r = 0; r < dx.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < dx.cols; ++c)
          acc += self.grad[r * dx.cols + c] * xv[r * dx.cols + c];
        (*g)[r] += acc;
      }
  });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary(
      "affine", x, [=](double v) { return scale * v + shift; },
      [=](double, double) { return scale; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double a = 0.044715;
  return unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + a * v * v * v))); },
      [](double v, double) {
        const double u = c * (v + a * v * v * v);
        const double t = std::tanh(u);
        const double du = c * (1.0 + 3.0 * a * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x, double floor) {
  return unary(
      "log", x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  if (axis == 0) return transpose(softmax(transpose(x), 1));
  const Dims d = dims(x);
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double* in = xv.data() + r * d.cols;
    double* o = out.data() + r * d.cols;
    const double mx = *std::max_element(in, in + d.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < d.cols; ++c) o[c] /= z;
  }
  return make_op("softmax", x.shape(), std::move(out), {x}, [d](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < d.rows; ++r) {
      const double* y = self.value.data() + r * d.cols;
      const double* g = self.grad.data() + r * d.cols;
      double dotyg = 0.0;
      for (std::size_t c = 0; c < d.cols; ++c) dotyg += y[c] * g[c];
      for (std::size_t c = 0; c < d.cols; ++c) (*gx)[r * d.cols + c] += y[c] * (g[c] - dotyg);
    }
  });
}

Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> allowed) {
  const Dims d = dims(x);
  if (allowed.size() != d.rows * d.cols) {
    throw DimensionError("masked_softmax_rows: mask size " + std::to_string(allowed.size()) +
                         " does not fit " + shape_string(x.shape()));
  }
  const auto xv = x.data();
  std::vector<double> out(xv.size(), 0.0);
  for (std::size_t r = 0; r < d.rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < d.cols; ++c)
      if (allowed[r * d.cols + c]) mx = std::max(mx, xv[r * d.cols + c]);
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractError("masked_softmax_rows: row " + std::to_string(r) + " is fully masked");
    }
    double z = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c)
      if (allowed[r * d.cols + c]) z += (out[r * d.cols + c] = std::exp(xv[r * d.cols + c] - mx));
    for (std::size_t c = 0; c < d.cols; ++c) out[r * d.cols + c] /= z;
  }
  return make_op("masked_softmax", x.shape(), std::move(out), {x}, [d](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < d.rows; ++r) {
      const double* y = self.value.data() + r * d.cols;
      const double* g = self.grad.data() + r * d.cols;
      double dotyg = 0.0;
      for (std::size_t c = 0; c < d.cols; ++c) dotyg += y[c] * g[c];
      for (std::size_t c = 0; c < d.cols; ++c) (*gx)[r * d.cols + c] += y[c] * (g[c] - dotyg);
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  const Dims d = dims(x);
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double* in = xv.data() + r * d.cols;
    const double mx = *std::max_element(in, in + d.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) z += std::exp(in[c] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < d.cols; ++c) out[r * d.cols + c] = in[c] - lz;
  }
  return make_op("log_softmax", x.shape(), std::move(out), {x}, [d](Node& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < d.rows; ++r) {
      const double* y = self.value.data() + r * d.cols;
      const double* g = self.grad.data() + r * d.cols;
      double gsum = 0.0;
      for (std::size_t c = 0; c < d.cols; ++c) gsum += g[c];
      for (std::size_t c = 0; c < d.cols; ++c) (*gx)[r * d.cols + c] += g[c] - std::exp(y[c]) * gsum;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Dims d = dims(x);
  if (gamma.size() != d.cols || beta.size() != d.cols) {
    throw DimensionError("layer_norm: gain/bias width does not match " + shape_string(x.shape()));
  }
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  std::vector<double> out(xv.size());
  // Normalised values and inverse std are kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(d.rows);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double* in = xv.data() + r * d.cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) mu += in[c];
    mu /= static_cast<double>(d.cols);
    double var = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(d.cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d.cols; ++c) {
      const double h = (in[c] - mu) * is;
      (*xhat)[r * d.cols + c] = h;
      out[r * d.cols + c] = gv[c] * h + bv[c];
    }
  }
  return make_op("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                 [d, xhat, inv_std](Node& self) {
                   const auto& gv = self.inputs[1]->value;
                   const auto& g = self.grad;
                   const double n = static_cast<double>(d.cols);
                   auto* gx = input_grad(self, 0);
                   auto* gg = input_grad(self, 1);
                   auto* gb = input_grad(self, 2);
                   for (std::size_t r = 0; r < d.rows; ++r) {
                     double sum_dh = 0.0, sum_dh_h = 0.0;
                     for (std::size_t c = 0; c < d.cols; ++c) {
                       const std::size_t i = r * d.cols + c;
                       const double dh = g[i] * gv[c];
                       sum_dh += dh;
                       sum_dh_h += dh * (*xhat)[i];
                       if (gg) (*gg)[c] += g[i] * (*xhat)[i];
                       if (gb) (*gb)[c] += g[i];
                     }
                     if (!gx) continue;
                     for (std::size_t c = 0; c < d.cols; ++c) {
                       const std::size_t i = r * d.cols + c;
                       const double dh = g[i] * gv[c];
                       (*gx)[i] += (*inv_std)[r] * (dh - sum_dh / n - (*xhat)[i] * sum_dh_h / n);
                     }
                   }
                 });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  const Dims d = dims(table);
  const auto tv = table.data();
  std::vector<double> out(ids.size() * d.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= d.rows) {
      throw ContractError("embedding: id " + std::to_string(ids[r]) + " out of range for table with " +
                          std::to_string(d.rows) + " rows");
    }
    std::copy_n(tv.data() + ids[r] * d.cols, d.cols, out.data() + r * d.cols);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return make_op("embedding", {ids.size(), d.cols}, std::move(out), {table},
                 [idx = std::move(idx), d](Node& self) {
                   auto* gt = input_grad(self, 0);
                   if (!gt) return;
                   for (std::size_t r = 0; r < idx.size(); ++r)
                     for (std::size_t c = 0; c < d.cols; ++c)
                       (*gt)[idx[r] * d.cols + c] += self.grad[r * d.cols + c];
                 });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) { return embedding(x, rows); }

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> index) {
  const Dims d = dims(x);
  if (index.size() != d.rows) throw DimensionError("gather_cols: one index per row required");
  const auto xv = x.data();
  std::vector<double> out(d.rows);
  for (std::size_t r = 0; r < d.rows; ++r) {
    if (index[r] >= d.cols) throw ContractError("gather_cols: column index out of range");
    out[r] = xv[r * d.cols + index[r]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_op("gather_cols", {d.rows, 1}, std::move(out), {x},
                 [idx = std::move(idx), d](Node& self) {
                   auto* gx = input_grad(self, 0);
                   if (!gx) return;
                   for (std::size_t r = 0; r < d.rows; ++r) (*gx)[r * d.cols + idx[r]] += self.grad[r];
                 });
}

Tensor scatter_cols(const Tensor& x, std::span<const std::size_t> index, std::size_t width) {
  const Dims d = dims(x);
  if (index.size() != d.cols) throw DimensionError("scatter_cols: one target per column required");
  for (auto i : index)
    if (i >= width) throw ContractError("scatter_cols: target column out of range");
  const auto xv = x.data();
  std::vector<double> out(d.rows * width, 0.0);
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) out[r * width + index[c]] += xv[r * d.cols + c];
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_op("scatter_cols", {d.rows, width}, std::move(out), {x},
                 [idx = std::move(idx), d, width](Node& self) {
                   auto* gx = input_grad(self, 0);
                   if (!gx) return;
                   for (std::size_t r = 0; r < d.rows; ++r)
                     for (std::size_t c = 0; c < d.cols; ++c)
                       (*gx)[r * d.cols + c] += self.grad[r * width + idx[c]];
                 });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Dims da = dims(a), db = dims(b);
  if (da.rows != db.rows) {
    throw DimensionError("concat_cols: row counts differ " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const std::size_t w = da.cols + db.cols;
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(da.rows * w);
  for (std::size_t r = 0; r < da.rows; ++r) {
    std::copy_n(av.data() + r * da.cols, da.cols, out.data() + r * w);
    std::copy_n(bv.data() + r * db.cols, db.cols, out.data() + r * w + da.cols);
  }
  return make_op("concat_cols", {da.rows, w}, std::move(out), {a, b}, [da, db, w](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t r = 0; r < da.rows; ++r)
        for (std::size_t c = 0; c < da.cols; ++c) (*g)[r * da.cols + c] += self.grad[r * w + c];
    if (auto* g = input_grad(self, 1))
      for (std::size_t r = 0; r < db.rows; ++r)
        for (std::size_t c = 0; c < db.cols; ++c)
          (*g)[r * db.cols + c] += self.grad[r * w + da.cols + c];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t w = dims(parts[0]).cols;
  std::vector<std::size_t> offsets;
  std::vector<double> out;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    const Dims d = dims(p);
    if (d.cols != w) throw DimensionError("concat_rows: widths differ");
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    rows += d.rows;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op("concat_rows", {rows, w}, std::move(out), std::move(inputs),
                 [offsets = std::move(offsets)](Node& self) {
                   for (std::size_t k = 0; k < offsets.size(); ++k) {
                     auto* g = input_grad(self, k);
                     if (!g) continue;
                     for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[offsets[k] + i];
                   }
                 });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const Dims d = dims(x);
  if (begin > end || end > d.rows) throw ContractError("slice_rows: bad range");
  const auto xv = x.data();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * d.cols),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * d.cols));
  return make_op("slice_rows", {end - begin, d.cols}, std::move(out), {x}, [begin, d](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[begin * d.cols + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const Dims d = dims(x);
  if (begin > end || end > d.cols) throw ContractError("slice_cols: bad range");
  const std::size_t w = end - begin;
  const auto xv = x.data();
  std::vector<double> out(d.rows * w);
  for (std::size_t r = 0; r < d.rows; ++r)
    std::copy_n(xv.data() + r * d.cols + begin, w, out.data() + r * w);
  return make_op("slice_cols", {d.rows, w}, std::move(out), {x}, [begin, w, d](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < d.rows; ++r)
      for (std::size_t c = 0; c < w; ++c) (*g)[r * d.cols + begin + c] += self.grad[r * w + c];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_op("sum", {}, {s}, {x}, [](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (auto& v : *g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_op("mean", {}, {s / n}, {x}, [n](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (auto& v : *g) v += self.grad[0] / n;
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: sizes differ " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const auto av = a.data(), bv = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return make_op("dot", {}, {s}, {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* g = input_grad(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0] * bv[i];
    if (auto* g = input_grad(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0] * av[i];
  });
}

Tensor average(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("average: no inputs");
  const std::size_t n = parts[0].size();
  std::vector<double> out(n, 0.0);
  for (const auto& p : parts) {
    require_same("average", parts[0], p);
    for (std::size_t i = 0; i < n; ++i) out[i] += p.data()[i];
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (auto& v : out) v *= inv;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op("average", parts[0].shape(), std::move(out), std::move(inputs), [inv](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto* g = input_grad(self, k);
      if (!g) continue;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * inv;
    }
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64* rng) {
  if (rate <= 0.0 || rng == nullptr) return x;
  if (rate >= 1.0) throw ContractError("dropout: rate must be < 1");
  const auto xv = x.data();
  auto keep = std::make_shared<std::vector<double>>(xv.size());
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
    (*keep)[i] = u >= rate ? scale : 0.0;
    out[i] = xv[i] * (*keep)[i];
  }
  return make_op("dropout", x.shape(), std::move(out), {x}, [keep](Node& self) {
    auto* g = input_grad(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * (*keep)[i];
  });
}

}  // namespace kpj::ad
