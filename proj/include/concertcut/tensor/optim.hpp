#pragma once

#include <cmath>
#include <vector>

#include "concertcut/tensor/nn.hpp"

namespace concertcut {

enum class OptimizerKind { adam, adamw };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adamw;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam / AdamW with bias correction. AdamW applies decoupled decay
// theta -= lr * wd * theta; Adam folds wd * theta into the gradient.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const ParameterSet& params) : cfg_(cfg) {
    for (const auto& [name, t] : params.entries()) {
      m_.emplace_back(t.numel(), 0.0);
      v_.emplace_back(t.numel(), 0.0);
    }
  }

  const OptimizerConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::size_t step_count() const { return step_; }

  void step(ParameterSet& params) {
    if (params.size() != m_.size()) throw ContractError("optimizer/parameter count mismatch");
    for (auto& [name, t] : params.entries()) {
      if (!t.has_grad()) throw ContractError("optimizer: parameter '" + name + "' has no gradient");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    std::size_t idx = 0;
    for (auto& [name, t] : params.entries()) {
      auto theta = t.mutable_data();
      const auto g = t.grad();
      auto& m = m_[idx];
      auto& v = v_[idx];
      if (m.size() != theta.size()) throw ContractError("optimizer: moment shape mismatch");
      for (std::size_t i = 0; i < theta.size(); ++i) {
        double gi = g[i];
        if (cfg_.kind == OptimizerKind::adam) {
          gi += cfg_.weight_decay * theta[i];
        } else {
          theta[i] -= cfg_.lr * cfg_.weight_decay * theta[i];
        }
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      ++idx;
    }
  }

 private:
  OptimizerConfig cfg_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Linear warm-up then linear decay to zero at total_epochs.
struct LrSchedule {
  double base_lr = 5e-4;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 50;

  void validate() const {
    if (warmup_epochs > total_epochs) throw ConfigError("warmup_epochs exceeds total_epochs");
    if (base_lr < 0) throw ConfigError("base_lr must be non-negative");
  }
};

inline double lr_at(const LrSchedule& s, std::size_t epoch) {
  s.validate();
  if (epoch < s.warmup_epochs) {
    return s.base_lr * static_cast<double>(epoch + 1) / static_cast<double>(s.warmup_epochs);
  }
  if (epoch >= s.total_epochs) return 0.0;
  const double span = static_cast<double>(s.total_epochs - s.warmup_epochs);
  return s.base_lr * static_cast<double>(s.total_epochs - epoch) / span;
}

}  // namespace concertcut
