#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "concertcut/audio/spec_augment.hpp"
#include "concertcut/eval/metrics.hpp"
#include "concertcut/tensor/optim.hpp"
#include "concertcut/temporal/model.hpp"

namespace concertcut::temporal {

// One labeled window: mel-major features plus its scalar input.
struct TemporalExample {
  std::vector<float> features;
  double l_seg = 0.0;
  int label = 0;
  std::vector<float> visual;
};

struct TemporalTrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 5e-4;
  double weight_decay = 0.01;
  std::size_t warmup_epochs = 5;
  double threshold = 0.5;
  bool balance = true;
  audio::SpecAugmentConfig augment;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (warmup_epochs > epochs) throw ConfigError("warmup_epochs exceeds epochs");
  }
};

// An entry of the balanced training set: an original example or a
// SpecAugment-ed copy of one (aug_seed set).
struct PlanItem {
  std::size_t source = 0;
  std::optional<std::uint64_t> aug_seed;
};

// Originals plus enough augmented copies of the minority class to make the
// class counts equal. Copies cycle through the minority examples.
inline std::vector<PlanItem> balanced_plan(const std::vector<int>& labels, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) {
    throw DegenerateError("training set contains a single class (" + std::to_string(pos.size()) +
                          " positive, " + std::to_string(neg.size()) + " negative)");
  }
  std::vector<PlanItem> plan;
  plan.reserve(2 * std::max(pos.size(), neg.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) plan.push_back({i, std::nullopt});
  const auto& minority = pos.size() < neg.size() ? pos : neg;
  const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();
  for (std::size_t j = 0; j < deficit; ++j) {
    plan.push_back({minority[j % minority.size()], derive_seed(seed, "specaugment", j)});
  }
  return plan;
}

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double val_f1 = 0.0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();
};

struct TemporalTrainResult {
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  double best_val_f1 = -1.0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
};

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

inline std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

inline ScoredSet score_examples(const TemporalModel& model, const std::vector<TemporalExample>& set) {
  ScoredSet out;
  for (const auto& ex : set) {
    const auto visual = to_double(ex.visual);
    out.scores.push_back(model.predict(to_double(ex.features), ex.l_seg, visual));
    out.labels.push_back(ex.label);
  }
  return out;
}

// AUC, or NaN when one class is missing.
inline double auc_or_nan(const ScoredSet& s) {
  bool pos = false, neg = false;
  for (int l : s.labels) (l ? pos : neg) = true;
  if (!pos || !neg) return std::numeric_limits<double>::quiet_NaN();
  return eval::auc_rank(s.scores, s.labels);
}

// Mini-batch AdamW on BCE with linear warm-up/decay. On return the model holds
// the parameters of the epoch with the best validation F1 (earliest on ties).
inline TemporalTrainResult train_temporal(TemporalModel& model, const std::vector<TemporalExample>& train,
                                          const std::vector<TemporalExample>& val,
                                          const TemporalTrainConfig& cfg, std::uint64_t seed,
                                          const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (train.empty()) throw ContractError("train_temporal: empty training split");
  if (val.empty()) throw ContractError("train_temporal: empty validation split");
  std::vector<int> labels;
  for (const auto& ex : train) labels.push_back(ex.label);
  std::vector<PlanItem> plan;
  if (cfg.balance) {
    plan = balanced_plan(labels, derive_seed(seed, "balance"));
  } else {
    balanced_plan(labels, 0);  // single-class check
    for (std::size_t i = 0; i < train.size(); ++i) plan.push_back({i, std::nullopt});
  }

  TemporalTrainResult result;
  for (const auto& item : plan) (train[item.source].label ? result.n_positive : result.n_negative) += 1;

  const auto& mc = model.config();
  auto features_of = [&](const PlanItem& item) {
    const auto& ex = train[item.source];
    if (!item.aug_seed) return to_double(ex.features);
    audio::Spectrogram s{mc.n_mels, mc.n_frames, to_double(ex.features)};
    return audio::spec_augment(s, cfg.augment, *item.aug_seed).values;
  };

  OptimizerConfig oc;
  oc.kind = OptimizerKind::adamw;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  Optimizer opt(oc, model.params());
  const LrSchedule sched{cfg.lr, cfg.warmup_epochs, cfg.epochs};
  std::vector<std::vector<double>> best;

  std::vector<std::size_t> order(plan.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_at(sched, epoch);
    opt.set_lr(log.lr);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "epoch", epoch));
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(b1 - b0);
      model.params().zero_grad();
      for (std::size_t i = b0; i < b1; ++i) {
        const auto& item = plan[order[i]];
        const auto& ex = train[item.source];
        const auto visual = to_double(ex.visual);
        const Tensor p = model.forward(model.input_tensor(features_of(item)), ex.l_seg, visual);
        const Tensor loss = bce_loss(p, Tensor::vector({static_cast<double>(ex.label)}));
        loss_sum += loss.item();
        scale(loss, inv_b).backward();
      }
      opt.step(model.params());
    }
    log.train_loss = loss_sum / static_cast<double>(order.size());

    const auto scored = score_examples(model, val);
    const auto report = eval::precision_recall_f1_accuracy(eval::confusion(scored.scores, scored.labels, cfg.threshold));
    log.val_precision = report.precision;
    log.val_recall = report.recall;
    log.val_f1 = report.f1;
    log.val_auc = auc_or_nan(scored);
    if (!std::isfinite(log.train_loss)) throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
    if (log.val_f1 > result.best_val_f1) {
      result.best_val_f1 = log.val_f1;
      result.best_epoch = epoch;
      best = model.params().snapshot();
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  model.params().restore(best);
  return result;
}

inline std::string training_log_csv(const std::vector<EpochLog>& history) {
  std::string out = "epoch,lr,train_loss,val_precision,val_recall,val_f1,val_auc\n";
  char buf[256];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.4f,%.4f,%.4f,%.6f\n", e.epoch, e.lr, e.train_loss,
                  e.val_precision, e.val_recall, e.val_f1, e.val_auc);
    out += buf;
  }
  return out;
}

}  // namespace concertcut::temporal
