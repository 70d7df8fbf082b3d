#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "concertcut/tensor/tensor.hpp"

namespace concertcut {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

inline CMapMat cmap(const double* p, std::size_t r, std::size_t c) {
  return CMapMat(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
inline MapMat map(double* p, std::size_t r, std::size_t c) {
  return MapMat(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

// Row-major operand of a product, optionally transposed.
struct Operand {
  const double* p;
  std::size_t rows, cols;
  bool t = false;
};

// c (+)= op(a) * op(b). Eigen's kernels pick scalar or packed paths from the
// buffer address, so operands are first copied into Eigen-owned (aligned)
// storage; otherwise results would vary with heap layout from run to run.
inline void gemm(const Operand& a, const Operand& b, double* c, bool accumulate) {
  const RowMat am = cmap(a.p, a.rows, a.cols), bm = cmap(b.p, b.rows, b.cols);
  RowMat out;
  if (a.t && b.t) {
    out.noalias() = am.transpose() * bm.transpose();
  } else if (a.t) {
    out.noalias() = am.transpose() * bm;
  } else if (b.t) {
    out.noalias() = am * bm.transpose();
  } else {
    out.noalias() = am * bm;
  }
  const double* src = out.data();
  const auto n = static_cast<std::size_t>(out.size());
  if (accumulate) {
    for (std::size_t i = 0; i < n; ++i) c[i] += src[i];
  } else {
    std::copy_n(src, n, c);
  }
}

// b broadcasts over a when b's shape equals a trailing slice of a's shape.
inline bool is_suffix(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

inline void check_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw DimensionError(std::string(op) + ": cannot broadcast " +
                         shape_str(b.shape()) + " onto " +
                         shape_str(a.shape()));
  }
}

template <class F, class DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), op, {&x},
                     [x, df](Node& n) {
                       auto gx = grad_of(x);
                       const auto xv = x.data();
                       for (std::size_t i = 0; i < n.grad.size(); ++i) {
                         gx[i] += n.grad[i] * df(xv[i], n.data[i]);
                       }
                     });
}

inline double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_broadcast(a, b, "add");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t m = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % m];
  return detail::make_result(a.shape(), std::move(out), "add", {&a, &b},
                             [a, b, m](detail::Node& n) {
                               if (detail::wants(a)) {
                                 auto g = detail::grad_of(a);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
                               }
                               if (detail::wants(b)) {
                                 auto g = detail::grad_of(b);
                                 for (std::size_t i = 0; i < n.grad.size(); ++i) g[i % m] += n.grad[i];
                               }
                             });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_broadcast(a, b, "sub");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t m = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i % m];
  return detail::make_result(a.shape(), std::move(out), "sub", {&a, &b},
                             [a, b, m](detail::Node& n) {
                               if (detail::wants(a)) {
                                 auto g = detail::grad_of(a);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
                               }
                               if (detail::wants(b)) {
                                 auto g = detail::grad_of(b);
                                 for (std::size_t i = 0; i < n.grad.size(); ++i) g[i % m] -= n.grad[i];
                               }
                             });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_broadcast(a, b, "mul");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t m = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i % m];
  return detail::make_result(a.shape(), std::move(out), "mul", {&a, &b},
                             [a, b, m](detail::Node& n) {
                               const auto av = a.data();
                               const auto bv = b.data();
                               if (detail::wants(a)) {
                                 auto g = detail::grad_of(a);
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i % m];
                               }
                               if (detail::wants(b)) {
                                 auto g = detail::grad_of(b);
                                 for (std::size_t i = 0; i < n.grad.size(); ++i) g[i % m] += n.grad[i] * av[i];
                               }
                             });
}

inline Tensor scale(const Tensor& x, double s) {
  return detail::unary(
      x, "scale", [s](double v) { return v * s; },
      [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  return detail::unary(
      x, "add_scalar", [s](double v) { return v + s; },
      [](double, double) { return 1.0; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x, "sigmoid", [](double v) { return detail::stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

// Swish with beta = 1: z * sigmoid(z).
inline Tensor silu(const Tensor& x) {
  return detail::unary(
      x, "silu", [](double v) { return v * detail::stable_sigmoid(v); },
      [](double v, double) {
        const double s = detail::stable_sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

inline Tensor sum(const Tensor& x) {
  const auto v = x.data();
  double s = 0.0;
  for (double e : v) s += e;
  return detail::make_result({1}, {s}, "sum", {&x}, [x](detail::Node& n) {
    auto g = detail::grad_of(x);
    for (auto& e : g) e += n.grad[0];
  });
}

inline Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " +
                         shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result(std::move(shape), std::move(out), "reshape", {&x},
                             [x](detail::Node& n) {
                               auto g = detail::grad_of(x);
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
                             });
}

inline Tensor flatten(const Tensor& x) { return reshape(x, {x.numel()}); }

// Standard 2-D product (m x k) * (k x n).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  detail::gemm({a.data().data(), m, k}, {b.data().data(), k, n}, out.data(), false);
  return detail::make_result(
      {m, n}, std::move(out), "matmul", {&a, &b},
      [a, b, m, k, n](detail::Node& node) {
        const detail::Operand g{node.grad.data(), m, n};
        if (detail::wants(a)) {
          detail::gemm(g, {b.data().data(), k, n, true}, detail::grad_of(a).data(), true);
        }
        if (detail::wants(b)) {
          detail::gemm({a.data().data(), m, k, true}, g, detail::grad_of(b).data(), true);
        }
      });
}

// x[..., D] * W[D, H] (+ bias[H]); leading axes are treated as rows.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {}) {
  if (w.rank() != 2 || x.shape().back() != w.dim(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) +
                         " vs weight " + shape_str(w.shape()));
  }
  const std::size_t d = w.dim(0), h = w.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != h)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / d;
  Shape shape = x.shape();
  shape.back() = h;
  std::vector<double> out(rows * h);
  detail::gemm({x.data().data(), rows, d}, {w.data().data(), d, h}, out.data(), false);
  if (bias.defined()) {
    const auto bv = bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < h; ++j) out[r * h + j] += bv[j];
    }
  }
  return detail::make_result(
      std::move(shape), std::move(out), "linear", {&x, &w, &bias},
      [x, w, bias, rows, d, h](detail::Node& node) {
        const detail::Operand g{node.grad.data(), rows, h};
        if (detail::wants(x)) {
          detail::gemm(g, {w.data().data(), d, h, true}, detail::grad_of(x).data(), true);
        }
        if (detail::wants(w)) {
          detail::gemm({x.data().data(), rows, d, true}, g, detail::grad_of(w).data(), true);
        }
        if (detail::wants(bias)) {
          auto gb = detail::grad_of(bias);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < h; ++j) gb[j] += node.grad[r * h + j];
          }
        }
      });
}

inline Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose expects a matrix");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  detail::map(out.data(), c, r) = detail::cmap(x.data().data(), r, c).transpose();
  return detail::make_result({c, r}, std::move(out), "transpose", {&x},
                             [x, r, c](detail::Node& n) {
                               detail::map(detail::grad_of(x).data(), r, c) +=
                                   detail::cmap(n.grad.data(), c, r).transpose();
                             });
}

// Swaps the two trailing axes of a tensor of rank >= 2.
inline Tensor swap_last2(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("swap_last2 expects rank >= 2");
  const std::size_t r = x.shape()[x.rank() - 2], c = x.shape().back();
  const std::size_t batch = x.numel() / (r * c);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    detail::map(out.data() + b * r * c, c, r) =
        detail::cmap(x.data().data() + b * r * c, r, c).transpose();
  }
  return detail::make_result(std::move(shape), std::move(out), "swap_last2", {&x},
                             [x, r, c, batch](detail::Node& n) {
                               auto g = detail::grad_of(x);
                               for (std::size_t b = 0; b < batch; ++b) {
                                 detail::map(g.data() + b * r * c, r, c) +=
                                     detail::cmap(n.grad.data() + b * r * c, c, r).transpose();
                               }
                             });
}

// Slice [start, start+len) of the last axis.
inline Tensor narrow_last(const Tensor& x, std::size_t start, std::size_t len) {
  const std::size_t d = x.shape().back();
  if (len == 0 || start + len > d) {
    throw DimensionError("narrow_last out of range");
  }
  const std::size_t rows = x.numel() / d;
  Shape shape = x.shape();
  shape.back() = len;
  std::vector<double> out(rows * len);
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(r * d + start), len,
                out.begin() + static_cast<std::ptrdiff_t>(r * len));
  }
  return detail::make_result(std::move(shape), std::move(out), "narrow_last", {&x},
                             [x, rows, d, start, len](detail::Node& n) {
                               auto g = detail::grad_of(x);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t j = 0; j < len; ++j) {
                                   g[r * d + start + j] += n.grad[r * len + j];
                                 }
                               }
                             });
}

// Concatenation along the last axis; leading shapes must agree.
inline Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_last of nothing");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape l = p.shape();
    l.pop_back();
    if (l != lead) throw DimensionError("concat_last leading shape mismatch");
    total += p.shape().back();
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape().back();
    const auto pv = p.data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    }
    offset += w;
  }
  Shape shape = lead;
  shape.push_back(total);
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  Tensor result(std::move(shape), std::move(out), false);
  result.node()->op = "concat_last";
  if (needs && grad_enabled()) {
    auto& n = *result.node();
    n.requires_grad = true;
    for (const auto& p : parts) n.parents.push_back(p.node());
    n.backward = [parts, rows, total](detail::Node& node) {
      std::size_t off = 0;
      for (const auto& p : parts) {
        const std::size_t w = p.shape().back();
        if (p.requires_grad()) {
          auto g = detail::grad_of(p);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) g[r * w + j] += node.grad[r * total + off + j];
          }
        }
        off += w;
      }
    };
  }
  return result;
}

// Numerically stable softmax along the last axis.
inline Tensor softmax(const Tensor& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double* o = out.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < d; ++j) o[j] /= z;
  }
  return detail::make_result(x.shape(), std::move(out), "softmax", {&x},
                             [x, rows, d](detail::Node& n) {
                               auto g = detail::grad_of(x);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const double* y = n.data.data() + r * d;
                                 const double* gy = n.grad.data() + r * d;
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < d; ++j) dot += y[j] * gy[j];
                                 for (std::size_t j = 0; j < d; ++j) g[r * d + j] += y[j] * (gy[j] - dot);
                               }
                             });
}

inline Tensor log_softmax(const Tensor& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += std::exp(in[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = in[j] - lz;
  }
  return detail::make_result(x.shape(), std::move(out), "log_softmax", {&x},
                             [x, rows, d](detail::Node& n) {
                               auto g = detail::grad_of(x);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 double gs = 0.0;
                                 for (std::size_t j = 0; j < d; ++j) gs += n.grad[r * d + j];
                                 for (std::size_t j = 0; j < d; ++j) {
                                   g[r * d + j] += n.grad[r * d + j] - std::exp(n.data[r * d + j]) * gs;
                                 }
                               }
                             });
}

// Normalizes each last-axis vector, then applies gamma/beta.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  const std::size_t d = x.shape().back();
  if (d == 0) throw DimensionError("layer_norm over empty axis");
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(d) +
                         " entries");
  }
  if (!(eps > 0)) throw ConfigError("layer_norm eps must be positive");
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mu) * inv_std[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), "layer_norm", {&x, &gamma, &beta},
      [x, gamma, beta, rows, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node& n) {
        const auto gv = gamma.data();
        if (detail::wants(gamma)) {
          auto gg = detail::grad_of(gamma);
          for (std::size_t i = 0; i < n.grad.size(); ++i) gg[i % d] += n.grad[i] * xhat[i];
        }
        if (detail::wants(beta)) {
          auto gb = detail::grad_of(beta);
          for (std::size_t i = 0; i < n.grad.size(); ++i) gb[i % d] += n.grad[i];
        }
        if (detail::wants(x)) {
          auto gx = detail::grad_of(x);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = n.grad[r * d + j] * gv[j];
              m1 += dh;
              m2 += dh * xhat[r * d + j];
            }
            m1 *= inv_d;
            m2 *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = n.grad[r * d + j] * gv[j];
              gx[r * d + j] += inv_std[r] * (dh - m1 - xhat[r * d + j] * m2);
            }
          }
        }
      });
}

// Swish(xW) * (xV) along the last axis.
inline Tensor swiglu(const Tensor& x, const Tensor& w, const Tensor& v) {
  if (w.shape() != v.shape()) throw DimensionError("swiglu: W and V differ in shape");
  return mul(silu(linear(x, w)), linear(x, v));
}

// Divides each last-axis vector by its L2 norm (floored at eps).
inline Tensor l2_normalize(const Tensor& x, double eps = 1e-12) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  std::vector<double> out(x.numel());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += xv[r * d + j] * xv[r * d + j];
    norms[r] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = xv[r * d + j] / norms[r];
  }
  return detail::make_result(x.shape(), std::move(out), "l2_normalize", {&x},
                             [x, rows, d, norms = std::move(norms)](detail::Node& n) {
                               auto g = detail::grad_of(x);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < d; ++j) dot += n.grad[r * d + j] * n.data[r * d + j];
                                 for (std::size_t j = 0; j < d; ++j) {
                                   g[r * d + j] += (n.grad[r * d + j] - n.data[r * d + j] * dot) / norms[r];
                                 }
                               }
                             });
}

// Valid (unpadded) 1-D cross-correlation over the last axis.
//   x:       [..., C_in, L]
//   kernels: [C_out, C_in, K]
//   bias:    [C_out] (optional)
//   result:  [..., C_out, floor((L - K) / stride) + 1]
inline Tensor conv1d(const Tensor& x, const Tensor& kernels, std::size_t stride = 1,
                     const Tensor& bias = {}) {
  if (kernels.rank() != 3) throw DimensionError("conv1d: kernels must be rank 3");
  if (x.rank() < 2) throw DimensionError("conv1d: input must be rank >= 2");
  if (stride == 0) throw ConfigError("conv1d: stride must be positive");
  const std::size_t c_out = kernels.dim(0), c_in = kernels.dim(1), k = kernels.dim(2);
  const std::size_t len = x.shape().back();
  if (x.shape()[x.rank() - 2] != c_in) {
    throw DimensionError("conv1d: input channels " +
                         std::to_string(x.shape()[x.rank() - 2]) +
                         " vs kernel channels " + std::to_string(c_in));
  }
  if (k > len) throw DimensionError("conv1d: kernel longer than input");
  if (bias.defined() && bias.numel() != c_out) throw DimensionError("conv1d: bias size");
  const std::size_t out_len = (len - k) / stride + 1;
  const std::size_t batch = x.numel() / (c_in * len);
  const std::size_t ck = c_in * k;
  const std::size_t rows = batch * out_len;

  // Row (b, l') of the patch matrix holds x[b, :, l'*stride : l'*stride + K].
  std::vector<double> patches(rows * ck);
  const auto xv = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < out_len; ++l) {
      double* row = patches.data() + (b * out_len + l) * ck;
      for (std::size_t c = 0; c < c_in; ++c) {
        const double* src = xv.data() + (b * c_in + c) * len + l * stride;
        std::copy_n(src, k, row + c * k);
      }
    }
  }
  std::vector<double> cols(rows * c_out);
  detail::gemm({patches.data(), rows, ck}, {kernels.data().data(), c_out, ck, true}, cols.data(), false);
  Shape shape = x.shape();
  shape[shape.size() - 2] = c_out;
  shape.back() = out_len;
  std::vector<double> out(batch * c_out * out_len);
  const auto bv = bias.defined() ? bias.data() : std::span<const double>{};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      const double bo = bias.defined() ? bv[o] : 0.0;
      for (std::size_t l = 0; l < out_len; ++l) {
        out[(b * c_out + o) * out_len + l] =
            cols[(b * out_len + l) * c_out + o] + bo;
      }
    }
  }
  return detail::make_result(
      std::move(shape), std::move(out), "conv1d", {&x, &kernels, &bias},
      [x, kernels, bias, stride, c_out, c_in, k, len, out_len, batch, ck, rows,
       patches = std::move(patches)](detail::Node& n) {
        std::vector<double> gcols(rows * c_out);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < c_out; ++o) {
            for (std::size_t l = 0; l < out_len; ++l) {
              gcols[(b * out_len + l) * c_out + o] = n.grad[(b * c_out + o) * out_len + l];
            }
          }
        }
        if (detail::wants(bias)) {
          auto gb = detail::grad_of(bias);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t o = 0; o < c_out; ++o) gb[o] += gcols[r * c_out + o];
          }
        }
        if (detail::wants(kernels)) {
          detail::gemm({gcols.data(), rows, c_out, true}, {patches.data(), rows, ck},
                       detail::grad_of(kernels).data(), true);
        }
        if (detail::wants(x)) {
          std::vector<double> gpatch(rows * ck);
          detail::gemm({gcols.data(), rows, c_out}, {kernels.data().data(), c_out, ck}, gpatch.data(), false);
          auto gx = detail::grad_of(x);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t l = 0; l < out_len; ++l) {
              const double* row = gpatch.data() + (b * out_len + l) * ck;
              for (std::size_t c = 0; c < c_in; ++c) {
                double* dst = gx.data() + (b * c_in + c) * len + l * stride;
                for (std::size_t j = 0; j < k; ++j) dst[j] += row[c * k + j];
              }
            }
          }
        }
      });
}

// out[b, i] = sum_j keys[b, i, j] * query[b, j]
inline Tensor batched_matvec(const Tensor& keys, const Tensor& query) {
  if (keys.rank() != 3 || query.rank() != 2 || keys.dim(0) != query.dim(0) ||
      keys.dim(2) != query.dim(1)) {
    throw DimensionError("batched_matvec: " + shape_str(keys.shape()) + " . " +
                         shape_str(query.shape()));
  }
  const std::size_t bsz = keys.dim(0), n = keys.dim(1), d = keys.dim(2);
  std::vector<double> out(bsz * n);
  for (std::size_t b = 0; b < bsz; ++b) {
    detail::gemm({keys.data().data() + b * n * d, n, d}, {query.data().data() + b * d, d, 1}, out.data() + b * n,
                 false);
  }
  return detail::make_result(
      {bsz, n}, std::move(out), "batched_matvec", {&keys, &query},
      [keys, query, bsz, n, d](detail::Node& node) {
        for (std::size_t b = 0; b < bsz; ++b) {
          const detail::Operand g{node.grad.data() + b * n, 1, n};
          if (detail::wants(keys)) {
            detail::gemm({g.p, 1, n, true}, {query.data().data() + b * d, 1, d},
                         detail::grad_of(keys).data() + b * n * d, true);
          }
          if (detail::wants(query)) {
            detail::gemm(g, {keys.data().data() + b * n * d, n, d}, detail::grad_of(query).data() + b * d, true);
          }
        }
      });
}

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy. Probabilities are clamped to
// [kBceClamp, 1 - kBceClamp]; the clamp passes no gradient.
inline Tensor bce_loss(const Tensor& p, const Tensor& y) {
  if (p.shape() != y.shape()) {
    throw DimensionError("bce_loss: " + shape_str(p.shape()) + " vs " +
                         shape_str(y.shape()));
  }
  const auto pv = p.data();
  const auto yv = y.data();
  const double inv_n = 1.0 / static_cast<double>(pv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double q = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
    total -= yv[i] * std::log(q) + (1.0 - yv[i]) * std::log(1.0 - q);
  }
  return detail::make_result({1}, {total * inv_n}, "bce_loss", {&p, &y},
                             [p, y, inv_n](detail::Node& n) {
                               if (!detail::wants(p)) return;
                               auto g = detail::grad_of(p);
                               const auto pv = p.data();
                               const auto yv = y.data();
                               for (std::size_t i = 0; i < pv.size(); ++i) {
                                 if (pv[i] < kBceClamp || pv[i] > 1.0 - kBceClamp) continue;
                                 const double q = pv[i];
                                 g[i] += n.grad[0] * inv_n * (-(yv[i] / q) + (1.0 - yv[i]) / (1.0 - q));
                               }
                             });
}

}  // namespace concertcut
