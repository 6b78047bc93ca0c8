#pragma once

// Differentiable primitives. The supported set is fixed: matmul, add, mul,
// relu, mean, sum, log, exp, softmax, cosine similarity, causal 1-D
// convolution, concatenation and row/element gather. Everything else in the
// library is a composition of these.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "darsd/tensor.hpp"

namespace darsd {

namespace detail {

inline bool is_row_broadcast(const Shape& big, const Shape& small) {
  if (big.size() != small.size() + 1) return false;
  return std::equal(small.begin(), small.end(), big.begin() + 1);
}

inline void require_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericDomainError(std::string(op) + ": non-finite input");
    }
  }
}

// [outer, axis, inner] view of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

// Elementwise sum. `b` may match `a` or drop its leading (batch) dimension.
inline Tensor add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  if (!same && !detail::is_row_broadcast(a.shape(), b.shape())) {
    throw ShapeError("add: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> out(n);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] + bd[i % m];
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result(
      "add", a.shape(), std::move(out), {a, b},
      [ai, bi, n, m](detail::TensorImpl& o) {
        if (ai->requires_grad) {
          auto g = ai->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i];
        }
        if (bi->requires_grad) {
          auto g = bi->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) g[i % m] += o.grad[i];
        }
      });
}

// Elementwise product with the same broadcasting rule as add().
inline Tensor mul(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  if (!same && !detail::is_row_broadcast(a.shape(), b.shape())) {
    throw ShapeError("mul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> out(n);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] * bd[i % m];
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result(
      "mul", a.shape(), std::move(out), {a, b},
      [ai, bi, n, m](detail::TensorImpl& o) {
        if (ai->requires_grad) {
          auto g = ai->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] * bi->data[i % m];
        }
        if (bi->requires_grad) {
          auto g = bi->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) g[i % m] += o.grad[i] * ai->data[i];
        }
      });
}

inline Tensor mul(const Tensor& a, double c) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= c;
  auto ai = a.impl();
  return detail::make_result("mul", a.shape(), std::move(out), {a},
                             [ai, c](detail::TensorImpl& o) {
                               auto g = ai->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += c * o.grad[i];
                             });
}

inline Tensor add(const Tensor& a, double c) {
  return add(a, Tensor::full(a.shape(), c));
}

inline Tensor sub(const Tensor& a, const Tensor& b) { return add(a, mul(b, -1.0)); }

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  auto ai = a.impl();
  return detail::make_result("relu", a.shape(), std::move(out), {a},
                             [ai](detail::TensorImpl& o) {
                               auto g = ai->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 if (ai->data[i] > 0.0) g[i] += o.grad[i];
                             });
}

inline Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
  auto ai = a.impl();
  return detail::make_result("exp", a.shape(), out, {a},
                             [ai, out](detail::TensorImpl& o) {
                               auto g = ai->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += out[i] * o.grad[i];
                             });
}

// Natural log. With floor > 0 inputs are clamped from below and the clamped
// entries pass no gradient; with floor == 0 a non-positive input is an error.
inline Tensor log(const Tensor& a, double floor = 0.0) {
  std::vector<double> out(a.size());
  auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = ad[i];
    if (floor > 0.0) {
      out[i] = std::log(std::max(x, floor));
    } else {
      if (!(x > 0.0)) throw NumericDomainError("log: non-positive input");
      out[i] = std::log(x);
    }
  }
  auto ai = a.impl();
  return detail::make_result("log", a.shape(), std::move(out), {a},
                             [ai, floor](detail::TensorImpl& o) {
                               auto g = ai->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 const double x = ai->data[i];
                                 if (x > floor) g[i] += o.grad[i] / x;
                               }
                             });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto ai = a.impl();
  return detail::make_result("sum", {}, {s}, {a}, [ai](detail::TensorImpl& o) {
    auto g = ai->grad_buffer();
    for (double& v : g) v += o.grad[0];
  });
}

// Reduces one axis away.
inline Tensor sum(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto ad = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.len; ++k)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += ad[(o * s.len + k) * s.inner + i];
  auto ai = a.impl();
  return detail::make_result(
      "sum", std::move(shape), std::move(out), {a},
      [ai, s](detail::TensorImpl& out_node) {
        auto g = ai->grad_buffer();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t k = 0; k < s.len; ++k)
            for (std::size_t i = 0; i < s.inner; ++i)
              g[(o * s.len + k) * s.inner + i] += out_node.grad[o * s.inner + i];
      });
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean of empty tensor");
  return mul(sum(a), 1.0 / static_cast<double>(a.size()));
}

inline Tensor mean(const Tensor& a, std::size_t axis) {
  const auto len = detail::split_axis(a.shape(), axis).len;
  if (len == 0) throw ContractError("mean over empty axis");
  return mul(sum(a, axis), 1.0 / static_cast<double>(len));
}

// Softmax over the last axis, max-shifted so large magnitudes stay finite.
inline Tensor softmax(const Tensor& a) {
  if (a.rank() == 0 || a.shape().back() == 0) {
    throw ContractError("softmax: needs at least one entry on the last axis");
  }
  detail::require_finite(a, "softmax");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  std::vector<double> out(a.size());
  auto ad = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = ad.data() + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] /= z;
  }
  auto ai = a.impl();
  return detail::make_result(
      "softmax", a.shape(), out, {a}, [ai, out, n, rows](detail::TensorImpl& o) {
        auto g = ai->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = out.data() + r * n;
          const double* gy = o.grad.data() + r * n;
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += y[i] * gy[i];
          for (std::size_t i = 0; i < n; ++i) g[r * n + i] += y[i] * (gy[i] - dot);
        }
      });
}

enum class Transpose { no, yes };

// A[p x q] * B[q x r], or A * B^T when B is given as [r x q].
inline Tensor matmul(const Tensor& a, const Tensor& b,
                     Transpose tb = Transpose::no) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expected matrices, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const bool bt = tb == Transpose::yes;
  const std::size_t p = a.dim(0), q = a.dim(1);
  const std::size_t bq = bt ? b.dim(1) : b.dim(0);
  const std::size_t r = bt ? b.dim(0) : b.dim(1);
  if (q != bq) {
    throw ShapeError("matmul: inner dimensions disagree for " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     (bt ? " (transposed)" : ""));
  }
  std::vector<double> out(p * r, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < p; ++i) {
    if (bt) {
      for (std::size_t j = 0; j < r; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < q; ++k) acc += ad[i * q + k] * bd[j * q + k];
        out[i * r + j] = acc;
      }
      continue;
    }
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ad[i * q + k];
      for (std::size_t j = 0; j < r; ++j) out[i * r + j] += aik * bd[k * r + j];
    }
  }
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result(
      "matmul", {p, r}, std::move(out), {a, b},
      [ai, bi, p, q, r, bt](detail::TensorImpl& o) {
        const auto& g = o.grad;
        if (ai->requires_grad) {  // dA = G * B^T
          auto ga = ai->grad_buffer();
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t k = 0; k < q; ++k) {
              double acc = 0.0;
              for (std::size_t j = 0; j < r; ++j)
                acc += g[i * r + j] * (bt ? bi->data[j * q + k] : bi->data[k * r + j]);
              ga[i * q + k] += acc;
            }
        }
        if (bi->requires_grad) {  // dB = A^T * G
          auto gb = bi->grad_buffer();
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t k = 0; k < q; ++k) {
              const double aik = ai->data[i * q + k];
              for (std::size_t j = 0; j < r; ++j) {
                if (bt)
                  gb[j * q + k] += aik * g[i * r + j];
                else
                  gb[k * r + j] += aik * g[i * r + j];
              }
            }
        }
      });
}

// Pairwise cosine similarity of rows: A[n x d], B[k x d] -> [n x k].
// Two 1-D vectors give a scalar. Zero-norm rows are rejected.
inline Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  const bool vec = a.rank() == 1 && b.rank() == 1;
  if (!vec && (a.rank() != 2 || b.rank() != 2)) {
    throw ShapeError("cosine_similarity: expected vectors or matrices, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t d = a.shape().back();
  if (b.shape().back() != d) {
    throw ShapeError("cosine_similarity: feature dims disagree for " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t n = vec ? 1 : a.dim(0);
  const std::size_t k = vec ? 1 : b.dim(0);
  auto norms = [d](std::span<const double> x, std::size_t rows) {
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * x[i * d + j];
      out[i] = std::sqrt(s);
      if (!(out[i] > 0.0) || !std::isfinite(out[i])) {
        throw DegenerateVectorError("cosine_similarity: row " +
                                    std::to_string(i) +
                                    " has zero or non-finite norm");
      }
    }
    return out;
  };
  const auto na = norms(a.data(), n);
  const auto nb = norms(b.data(), k);
  std::vector<double> out(n * k);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += ad[i * d + t] * bd[j * d + t];
      out[i * k + j] = dot / (na[i] * nb[j]);
    }
  Shape shape = vec ? Shape{} : Shape{n, k};
  auto ai = a.impl(), bi = b.impl();
  return detail::make_result(
      "cosine", std::move(shape), out, {a, b},
      [ai, bi, na, nb, out, n, k, d](detail::TensorImpl& o) {
        // dc/da = (b/|b| - c a/|a|) / |a|
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double g = o.grad[i * k + j];
            if (g == 0.0) continue;
            const double c = out[i * k + j];
            const double* x = ai->data.data() + i * d;
            const double* y = bi->data.data() + j * d;
            if (ai->requires_grad) {
              auto ga = ai->grad_buffer();
              for (std::size_t t = 0; t < d; ++t)
                ga[i * d + t] += g * (y[t] / nb[j] - c * x[t] / na[i]) / na[i];
            }
            if (bi->requires_grad) {
              auto gb = bi->grad_buffer();
              for (std::size_t t = 0; t < d; ++t)
                gb[j * d + t] += g * (x[t] / na[i] - c * y[t] / nb[j]) / nb[j];
            }
          }
      });
}

// Causal dilated convolution over time.
//   x: [batch x T x C_in], weight: [C_out x K x C_in], bias: [C_out]
//   y[b,t,o] = bias[o] + sum_{k,c} w[o,k,c] * x[b, t - (K-1-k)*dilation, c]
// with zero padding on the left, so y keeps length T.
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     std::size_t dilation) {
  if (x.rank() != 3 || weight.rank() != 3 || bias.rank() != 1) {
    throw ShapeError("conv1d: expected x[BxTxC], w[OxKxC], b[O], got " +
                     shape_str(x.shape()) + ", " + shape_str(weight.shape()) +
                     ", " + shape_str(bias.shape()));
  }
  const std::size_t nb = x.dim(0), T = x.dim(1), C = x.dim(2);
  const std::size_t O = weight.dim(0), K = weight.dim(1);
  if (weight.dim(2) != C || bias.dim(0) != O) {
    throw ShapeError("conv1d: channel mismatch between input " +
                     shape_str(x.shape()) + " and weight " +
                     shape_str(weight.shape()));
  }
  if (dilation == 0) throw ContractError("conv1d: dilation must be >= 1");
  std::vector<double> out(nb * T * O);
  auto xd = x.data();
  auto wd = weight.data();
  auto bd = bias.data();
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t o = 0; o < O; ++o) {
        double acc = bd[o];
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t back = (K - 1 - k) * dilation;
          if (back > t) continue;
          const double* xr = xd.data() + (b * T + (t - back)) * C;
          const double* wr = wd.data() + (o * K + k) * C;
          for (std::size_t c = 0; c < C; ++c) acc += wr[c] * xr[c];
        }
        out[(b * T + t) * O + o] = acc;
      }
  auto xi = x.impl(), wi = weight.impl(), bi = bias.impl();
  return detail::make_result(
      "conv1d", {nb, T, O}, std::move(out), {x, weight, bias},
      [xi, wi, bi, nb, T, C, O, K, dilation](detail::TensorImpl& o_node) {
        const auto& g = o_node.grad;
        std::span<double> gx, gw, gb;
        if (xi->requires_grad) gx = xi->grad_buffer();
        if (wi->requires_grad) gw = wi->grad_buffer();
        if (bi->requires_grad) gb = bi->grad_buffer();
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t o = 0; o < O; ++o) {
              const double go = g[(b * T + t) * O + o];
              if (go == 0.0) continue;
              if (!gb.empty()) gb[o] += go;
              for (std::size_t k = 0; k < K; ++k) {
                const std::size_t back = (K - 1 - k) * dilation;
                if (back > t) continue;
                const std::size_t xo = (b * T + (t - back)) * C;
                const std::size_t wo = (o * K + k) * C;
                if (!gw.empty())
                  for (std::size_t c = 0; c < C; ++c) gw[wo + c] += go * xi->data[xo + c];
                if (!gx.empty())
                  for (std::size_t c = 0; c < C; ++c) gx[xo + c] += go * wi->data[wo + c];
              }
            }
      });
}

// Concatenates along `axis`; all other dimensions must agree.
inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) {
    throw ShapeError("concat: axis out of range for " + shape_str(shape));
  }
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(s) + " vs " +
                       shape_str(shape));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != shape[i]) {
        throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " +
                         shape_str(shape));
      }
    }
    total += s[axis];
  }
  shape[axis] = total;
  const auto outer = detail::split_axis(shape, axis).outer;
  const auto inner = detail::split_axis(shape, axis).inner;
  std::vector<double> out(shape_size(shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pd.data() + o * len * inner, len * inner,
                  out.data() + (o * total + off) * inner);
    off += len;
  }
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return detail::make_result(
      "concat", std::move(shape), std::move(out), parts,
      [impls, offsets, outer, inner, total, axis](detail::TensorImpl& o_node) {
        for (std::size_t p = 0; p < impls.size(); ++p) {
          if (!impls[p]->requires_grad) continue;
          auto g = impls[p]->grad_buffer();
          const std::size_t len = impls[p]->shape[axis];
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < len * inner; ++i)
              g[o * len * inner + i] +=
                  o_node.grad[(o * total + offsets[p]) * inner + i];
        }
      });
}

// Selects rows (slices along axis 0) by index; indices may repeat.
inline Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  if (a.rank() == 0) throw ShapeError("gather_rows: scalar input");
  const std::size_t n = a.dim(0);
  const std::size_t stride = n == 0 ? 0 : a.size() / n;
  Shape shape = a.shape();
  shape[0] = rows.size();
  std::vector<double> out(rows.size() * stride);
  auto ad = a.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) +
                       " out of range for " + shape_str(a.shape()));
    }
    std::copy_n(ad.data() + rows[i] * stride, stride, out.data() + i * stride);
  }
  auto ai = a.impl();
  return detail::make_result("gather", std::move(shape), std::move(out), {a},
                             [ai, rows, stride](detail::TensorImpl& o) {
                               auto g = ai->grad_buffer();
                               for (std::size_t i = 0; i < rows.size(); ++i)
                                 for (std::size_t j = 0; j < stride; ++j)
                                   g[rows[i] * stride + j] += o.grad[i * stride + j];
                             });
}

// out[i] = a[i, cols[i]] for a[n x c].
inline Tensor pick(const Tensor& a, const std::vector<std::size_t>& cols) {
  if (a.rank() != 2 || a.dim(0) != cols.size()) {
    throw ShapeError("pick: expected [n x c] with n == " +
                     std::to_string(cols.size()) + ", got " +
                     shape_str(a.shape()));
  }
  const std::size_t c = a.dim(1);
  std::vector<double> out(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= c) throw ShapeError("pick: column index out of range");
    out[i] = a.data()[i * c + cols[i]];
  }
  auto ai = a.impl();
  return detail::make_result("pick", {cols.size()}, std::move(out), {a},
                             [ai, cols, c](detail::TensorImpl& o) {
                               auto g = ai->grad_buffer();
                               for (std::size_t i = 0; i < cols.size(); ++i)
                                 g[i * c + cols[i]] += o.grad[i];
                             });
}

}  // namespace darsd
