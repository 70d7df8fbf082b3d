#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "concertcut/core/error.hpp"

namespace concertcut::eval {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

// All values in percent. A zero denominator yields 0.
struct ClassificationReport {
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
};

inline ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                                 double threshold = 0.5) {
  if (scores.size() != labels.size()) throw DimensionError("confusion: scores/labels size mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] != 0;
    if (pred && pos) ++c.tp;
    else if (pred) ++c.fp;
    else if (pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline ClassificationReport precision_recall_f1_accuracy(const ConfusionCounts& c) {
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  ClassificationReport r;
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  r.accuracy = ratio(c.tp + c.tn, c.total());
  return r;
}

struct RocCurve {
  std::vector<double> thresholds;  // descending; the first is +inf
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

inline void require_both_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores/labels size mismatch");
  const auto pos = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (pos == 0 || static_cast<std::size_t>(pos) == labels.size()) {
    throw ContractError("roc_auc requires both classes to be present");
  }
}

// Mann-Whitney statistic with midranks: P(pos > neg) + P(tie) / 2.
inline double auc_rank(std::span<const double> scores, std::span<const int> labels) {
  require_both_classes(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank (i+1+j)/2.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q) {
      if (labels[order[q]] != 0) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  // Exact in double for the sizes used here: the rank sum is a half-integer.
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require_both_classes(scores, labels);
  RocCurve c;
  c.auc = auc_rank(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0, n_neg = 0;
  for (int l : labels) (l != 0 ? n_pos : n_neg) += 1;
  c.thresholds.push_back(INFINITY);
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] != 0 ? tp : fp) += 1;
      ++i;
    }
    c.thresholds.push_back(s);
    c.fpr.push_back(fp / n_neg);
    c.tpr.push_back(tp / n_pos);
  }
  return c;
}

// Trapezoidal area under the swept curve; agrees with auc_rank.
inline double curve_area(const RocCurve& c) {
  double a = 0.0;
  for (std::size_t i = 1; i < c.fpr.size(); ++i) {
    a += (c.fpr[i] - c.fpr[i - 1]) * (c.tpr[i] + c.tpr[i - 1]) / 2.0;
  }
  return a;
}

// Percent of queries whose target ranks in the top k. Ties go to the lower
// candidate index.
inline double recall_at_k(const std::vector<std::vector<double>>& logits,
                          std::span<const std::size_t> targets, std::size_t k) {
  if (k == 0) throw ContractError("recall_at_k: k must be positive");
  if (logits.size() != targets.size()) throw DimensionError("recall_at_k: logits/targets size mismatch");
  if (logits.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < logits.size(); ++q) {
    const auto& row = logits[q];
    if (k > row.size()) throw ContractError("recall_at_k: k exceeds candidate count");
    if (targets[q] >= row.size()) throw ContractError("recall_at_k: target out of range");
    const double t = row[targets[q]];
    // Rank of the target under (score desc, index asc).
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] > t || (row[i] == t && i < targets[q])) ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(logits.size());
}

}  // namespace concertcut::eval
