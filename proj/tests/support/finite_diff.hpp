#pragma once

// Central finite-difference oracle for reverse-mode gradients. It only calls
// the forward closure and never touches backward code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "concertcut/core/rng.hpp"
#include "concertcut/tensor/ops.hpp"

namespace concertcut::testing {

inline constexpr double kGradNormFloor = 1e-6;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Norm-wise relative error between analytic and numeric gradients of one
// tensor: ||a - n|| / max(||a||, ||n||, floor). The floor keeps gradients
// that are analytically zero (e.g. attention key biases) from dividing
// round-off noise by round-off noise.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), kGradNormFloor});
  return std::sqrt(diff) / denom;
}

// `loss` must rebuild the graph from `inputs` on every call and return a
// scalar. At most `max_entries` coordinates per tensor are probed (chosen
// with `rng`); pass 0 to probe all of them.
inline GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                       std::vector<std::pair<std::string, Tensor>> inputs,
                                       double h = 1e-5, std::size_t max_entries = 0,
                                       Rng* rng = nullptr) {
  for (auto& [n, t] : inputs) t.zero_grad();
  loss().backward();
  GradCheckResult result;
  for (auto& [name, t] : inputs) {
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (max_entries && idx.size() > max_entries && rng) {
      rng->shuffle(idx);
      idx.resize(max_entries);
      std::sort(idx.begin(), idx.end());
    }
    std::vector<double> analytic, numeric;
    const auto g = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                : std::vector<double>(t.numel(), 0.0);
    auto data = t.mutable_data();
    for (auto i : idx) {
      const double orig = data[i];
      double fp, fm;
      {
        NoGradGuard ng;
        data[i] = orig + h;
        fp = loss().item();
        data[i] = orig - h;
        fm = loss().item();
      }
      data[i] = orig;
      analytic.push_back(g[i]);
      numeric.push_back((fp - fm) / (2.0 * h));
    }
    const double err = relative_error(analytic, numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_tensor = name;
    }
  }
  return result;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Scalarizes any output with fixed random weights so all output entries
// contribute to the checked gradient.
inline Tensor weighted_sum(const Tensor& out, const Tensor& weights) {
  return sum(mul(out, weights));
}

}  // namespace concertcut::testing
