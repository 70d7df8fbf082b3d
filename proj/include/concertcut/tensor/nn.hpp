#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "concertcut/core/rng.hpp"
#include "concertcut/tensor/ops.hpp"

namespace concertcut {

// Ordered, named view over trainable tensors. Names are stable and used as
// checkpoint keys.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor t) {
    t.set_requires_grad(true);
    entries_.emplace_back(std::move(name), std::move(t));
    return entries_.back().second;
  }

  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : entries_) {
      if (n == name) return &t;
    }
    return nullptr;
  }

  void zero_grad() {
    for (auto& [n, t] : entries_) t.zero_grad();
  }

  std::size_t numel() const {
    std::size_t total = 0;
    for (const auto& [n, t] : entries_) total += t.numel();
    return total;
  }

  // Deep copy of values; the copies are fresh leaves.
  std::vector<std::vector<double>> snapshot() const {
    std::vector<std::vector<double>> out;
    out.reserve(entries_.size());
    for (const auto& [n, t] : entries_) out.emplace_back(t.data().begin(), t.data().end());
    return out;
  }

  void restore(const std::vector<std::vector<double>>& values) {
    if (values.size() != entries_.size()) throw ContractError("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto d = entries_[i].second.mutable_data();
      if (d.size() != values[i].size()) throw ContractError("snapshot shape mismatch");
      std::copy(values[i].begin(), values[i].end(), d.begin());
    }
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
inline Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

struct LinearParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static LinearParams make(ParameterSet& ps, const std::string& name, std::size_t in,
                           std::size_t out, Rng& rng) {
    LinearParams p;
    p.weight = ps.add(name + ".weight", init_uniform({in, out}, in, rng));
    p.bias = ps.add(name + ".bias", init_uniform({out}, in, rng));
    return p;
  }

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }

  void zero_fill() {
    std::fill(weight.mutable_data().begin(), weight.mutable_data().end(), 0.0);
    std::fill(bias.mutable_data().begin(), bias.mutable_data().end(), 0.0);
  }
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  static LayerNormParams make(ParameterSet& ps, const std::string& name, std::size_t d) {
    LayerNormParams p;
    p.gamma = ps.add(name + ".gamma", Tensor::ones({d}));
    p.beta = ps.add(name + ".beta", Tensor::zeros({d}));
    return p;
  }

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

// Fixed encoding: PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(.)
inline Tensor sinusoidal_pe(std::size_t seq_len, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("sinusoidal_pe requires an even, positive d_model");
  }
  if (seq_len == 0) throw ConfigError("sinusoidal_pe requires seq_len > 0");
  std::vector<double> v(seq_len * d_model);
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double freq =
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      const double a = static_cast<double>(pos) / freq;
      v[pos * d_model + 2 * i] = std::sin(a);
      v[pos * d_model + 2 * i + 1] = std::cos(a);
    }
  }
  return Tensor({seq_len, d_model}, std::move(v), false);
}

// Pre-norm encoder block: x + MHA(LN(x)), then h + FFN(LN(h)).
struct TransformerLayer {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  LayerNormParams ln1, ln2;
  LinearParams q, k, v, o;
  LinearParams ffn_in, ffn_out;

  static TransformerLayer make(ParameterSet& ps, const std::string& name, std::size_t d_model,
                               std::size_t heads, std::size_t ffn_mult, Rng& rng) {
    if (heads == 0 || d_model % heads != 0) {
      throw ConfigError("transformer: d_model " + std::to_string(d_model) +
                        " not divisible by heads " + std::to_string(heads));
    }
    TransformerLayer t;
    t.d_model = d_model;
    t.heads = heads;
    t.ln1 = LayerNormParams::make(ps, name + ".ln1", d_model);
    t.q = LinearParams::make(ps, name + ".attn.q", d_model, d_model, rng);
    t.k = LinearParams::make(ps, name + ".attn.k", d_model, d_model, rng);
    t.v = LinearParams::make(ps, name + ".attn.v", d_model, d_model, rng);
    t.o = LinearParams::make(ps, name + ".attn.o", d_model, d_model, rng);
    t.ln2 = LayerNormParams::make(ps, name + ".ln2", d_model);
    t.ffn_in = LinearParams::make(ps, name + ".ffn.in", d_model, d_model * ffn_mult, rng);
    t.ffn_out = LinearParams::make(ps, name + ".ffn.out", d_model * ffn_mult, d_model, rng);
    return t;
  }

  Tensor attention(const Tensor& x) const {
    const std::size_t dh = d_model / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const Tensor qs = q(x), ks = k(x), vs = v(x);
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor qh = narrow_last(qs, h * dh, dh);
      const Tensor kh = narrow_last(ks, h * dh, dh);
      const Tensor vh = narrow_last(vs, h * dh, dh);
      const Tensor weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
      outs.push_back(matmul(weights, vh));
    }
    return o(heads == 1 ? outs[0] : concat_last(outs));
  }

  // x: [T, d_model]
  Tensor operator()(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != d_model) {
      throw DimensionError("transformer: expected [T, " + std::to_string(d_model) + "], got " +
                           shape_str(x.shape()));
    }
    const Tensor h = add(x, attention(ln1(x)));
    return add(h, ffn_out(silu(ffn_in(ln2(h)))));
  }
};

}  // namespace concertcut
