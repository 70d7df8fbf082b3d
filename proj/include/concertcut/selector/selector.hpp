#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "concertcut/eval/metrics.hpp"
#include "concertcut/tensor/optim.hpp"

namespace concertcut::selector {

struct SelectorConfig {
  std::size_t input_dim = 512;
  std::size_t proj_dim = 128;
  std::size_t candidates = 10;
};

// q = tanh(a W_q + b_q), k_i = tanh(c_i W_k + b_k), s_i = k_i . q / sqrt(d).
class MatchingModule {
 public:
  MatchingModule(SelectorConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.input_dim == 0 || cfg_.proj_dim == 0 || cfg_.candidates == 0) {
      throw ConfigError("selector dimensions must be positive");
    }
    Rng rng(seed);
    query_ = LinearParams::make(params_, "query", cfg_.input_dim, cfg_.proj_dim, rng);
    key_ = LinearParams::make(params_, "key", cfg_.input_dim, cfg_.proj_dim, rng);
  }

  MatchingModule(const MatchingModule&) = delete;
  MatchingModule& operator=(const MatchingModule&) = delete;
  MatchingModule(MatchingModule&&) = default;
  MatchingModule& operator=(MatchingModule&&) = default;

  const SelectorConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  LinearParams& query() { return query_; }
  LinearParams& key() { return key_; }

  // anchors [B, D], candidates [B, N, D] -> logits [B, N]
  Tensor logits(const Tensor& anchors, const Tensor& candidates) const {
    if (anchors.rank() != 2 || anchors.dim(1) != cfg_.input_dim) {
      throw DimensionError("selector: anchors must be [B, " + std::to_string(cfg_.input_dim) + "], got " +
                           shape_str(anchors.shape()));
    }
    if (candidates.rank() != 3 || candidates.dim(0) != anchors.dim(0) || candidates.dim(2) != cfg_.input_dim) {
      throw DimensionError("selector: candidates must be [B, N, " + std::to_string(cfg_.input_dim) + "], got " +
                           shape_str(candidates.shape()));
    }
    const Tensor q = tanh(query_(anchors));
    const Tensor k = tanh(key_(candidates));
    return scale(batched_matvec(k, q), 1.0 / std::sqrt(static_cast<double>(cfg_.proj_dim)));
  }

  struct Scores {
    std::vector<double> logits;
    std::vector<double> distribution;
  };

  Scores score_candidates(std::span<const double> anchor, const std::vector<std::vector<double>>& candidates) const {
    if (anchor.size() != cfg_.input_dim) throw DimensionError("selector: anchor length mismatch");
    std::vector<double> flat;
    for (const auto& c : candidates) {
      if (c.size() != cfg_.input_dim) throw DimensionError("selector: candidate length mismatch");
      flat.insert(flat.end(), c.begin(), c.end());
    }
    if (candidates.empty()) throw DimensionError("selector: no candidates");
    NoGradGuard guard;
    const Tensor s = logits(Tensor({1, cfg_.input_dim}, {anchor.begin(), anchor.end()}),
                            Tensor({1, candidates.size(), cfg_.input_dim}, std::move(flat)));
    Scores out;
    out.logits.assign(s.data().begin(), s.data().end());
    const Tensor p = softmax(s);
    out.distribution.assign(p.data().begin(), p.data().end());
    return out;
  }

 private:
  SelectorConfig cfg_;
  ParameterSet params_;
  LinearParams query_, key_;
};

inline Tensor one_hot_rows(std::span<const std::size_t> targets, std::size_t n) {
  std::vector<double> v(targets.size() * n, 0.0);
  for (std::size_t b = 0; b < targets.size(); ++b) {
    if (targets[b] >= n) throw ContractError("selector: target index out of range");
    v[b * n + targets[b]] = 1.0;
  }
  return Tensor({targets.size(), n}, std::move(v));
}

// Elementwise BCE of the softmax distribution against the one-hot target,
// averaged over all positions.
inline Tensor selector_loss(const Tensor& distribution, std::span<const std::size_t> targets) {
  if (distribution.rank() != 2 || distribution.dim(0) != targets.size()) {
    throw DimensionError("selector_loss: distribution must be [B, N] with B targets");
  }
  return bce_loss(distribution, one_hot_rows(targets, distribution.dim(1)));
}

// Categorical cross-entropy on the logits, averaged over queries.
inline Tensor selector_ce_loss(const Tensor& logits, std::span<const std::size_t> targets) {
  const Tensor t = one_hot_rows(targets, logits.dim(1));
  return scale(sum(mul(log_softmax(logits), t)), -1.0 / static_cast<double>(targets.size()));
}

// One query: stored flat so batches are cheap to assemble.
struct SelectorExample {
  std::vector<double> anchor;      // D
  std::vector<double> candidates;  // N * D
  std::size_t target = 0;
};

struct SelectorTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 1e-5;
  bool cross_entropy = false;
  double target_recall = 101.0;  // early stop once validation R@1 reaches this (percent)
};

struct SelectorEpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_recall_at_1 = 0.0;
  double val_recall_at_3 = 0.0;
};

struct SelectorTrainResult {
  std::vector<SelectorEpochLog> history;
  std::size_t best_epoch = 0;
  double best_recall_at_1 = -1.0;
};

inline std::pair<Tensor, Tensor> make_batch(const std::vector<SelectorExample>& set,
                                            std::span<const std::size_t> idx, const SelectorConfig& cfg,
                                            std::vector<std::size_t>& targets) {
  const std::size_t d = cfg.input_dim, n = cfg.candidates;
  std::vector<double> a, c;
  a.reserve(idx.size() * d);
  c.reserve(idx.size() * n * d);
  targets.clear();
  for (auto i : idx) {
    const auto& ex = set[i];
    if (ex.anchor.size() != d || ex.candidates.size() != n * d) {
      throw DimensionError("selector example has wrong dimensions");
    }
    a.insert(a.end(), ex.anchor.begin(), ex.anchor.end());
    c.insert(c.end(), ex.candidates.begin(), ex.candidates.end());
    targets.push_back(ex.target);
  }
  return {Tensor({idx.size(), d}, std::move(a)), Tensor({idx.size(), n, d}, std::move(c))};
}

inline std::vector<std::vector<double>> score_examples(const MatchingModule& m,
                                                       const std::vector<SelectorExample>& set,
                                                       std::size_t chunk = 256) {
  NoGradGuard guard;
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> idx, targets;
  const std::size_t n = m.config().candidates;
  for (std::size_t b0 = 0; b0 < set.size(); b0 += chunk) {
    idx.clear();
    for (std::size_t i = b0; i < std::min(set.size(), b0 + chunk); ++i) idx.push_back(i);
    auto [a, c] = make_batch(set, idx, m.config(), targets);
    const Tensor s = m.logits(a, c);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.emplace_back(s.data().begin() + static_cast<std::ptrdiff_t>(r * n),
                       s.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
    }
  }
  return out;
}

inline std::vector<std::size_t> targets_of(const std::vector<SelectorExample>& set) {
  std::vector<std::size_t> t;
  for (const auto& ex : set) t.push_back(ex.target);
  return t;
}

// Adam on the selector loss. On return the module holds the parameters of the
// epoch with the best validation Recall@1 (earliest on ties).
inline SelectorTrainResult train_selector(MatchingModule& m, const std::vector<SelectorExample>& train,
                                          const std::vector<SelectorExample>& val,
                                          const SelectorTrainConfig& cfg, std::uint64_t seed,
                                          const std::function<void(const SelectorEpochLog&)>& on_epoch = {}) {
  if (train.empty()) throw ContractError("train_selector: empty training triplet set");
  if (val.empty()) throw ContractError("train_selector: empty validation triplet set");
  if (cfg.batch_size == 0 || cfg.epochs == 0) throw ConfigError("train_selector: epochs and batch_size must be >= 1");
  OptimizerConfig oc;
  oc.kind = OptimizerKind::adam;
  oc.lr = cfg.lr;
  oc.weight_decay = 0.0;
  Optimizer opt(oc, m.params());
  SelectorTrainResult result;
  std::vector<std::vector<double>> best = m.params().snapshot();
  const auto val_targets = targets_of(val);
  std::vector<std::size_t> order(train.size()), targets;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "selector-epoch", epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + b0, std::min(cfg.batch_size, order.size() - b0));
      auto [a, c] = make_batch(train, idx, m.config(), targets);
      m.params().zero_grad();
      const Tensor s = m.logits(a, c);
      const Tensor loss = cfg.cross_entropy ? selector_ce_loss(s, targets) : selector_loss(softmax(s), targets);
      loss.backward();
      opt.step(m.params());
      loss_sum += loss.item();
      ++batches;
    }
    SelectorEpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(batches);
    const auto scores = score_examples(m, val);
    log.val_recall_at_1 = eval::recall_at_k(scores, val_targets, 1);
    log.val_recall_at_3 = eval::recall_at_k(scores, val_targets, std::min<std::size_t>(3, m.config().candidates));
    if (log.val_recall_at_1 > result.best_recall_at_1) {
      result.best_recall_at_1 = log.val_recall_at_1;
      result.best_epoch = epoch;
      best = m.params().snapshot();
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val_recall_at_1 >= cfg.target_recall) break;
  }
  m.params().restore(best);
  return result;
}

}  // namespace concertcut::selector
