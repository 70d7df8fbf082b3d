#pragma once

#include <string>
#include <vector>

#include "concertcut/cluster/clustering.hpp"

namespace concertcut::cluster {

struct TripletRecord {
  std::string video_id;
  std::size_t anchor_frame = 0;
  std::vector<std::size_t> candidates;
  std::size_t target_index = 0;

  bool operator==(const TripletRecord&) const = default;
};

struct TripletBuildResult {
  std::vector<TripletRecord> triplets;
  std::size_t skipped = 0;  // anchors whose distractor pool was too small
};

// Anchor i, positive i + 1, and `distractors` frames drawn without replacement
// from clusters other than those of the anchor and the positive. The positive
// is inserted at a uniformly random slot.
inline TripletBuildResult build_triplets(const ClusterAssignment& a, std::size_t distractors = 9,
                                         std::uint64_t seed = 42, std::size_t min_clusters = 6) {
  TripletBuildResult out;
  if (a.k < min_clusters) return out;
  const std::size_t n = a.labels.size();
  Rng rng(derive_seed(seed, a.video_id));
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t ca = a.labels[i], cp = a.labels[i + 1];
    pool.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (a.labels[j] != ca && a.labels[j] != cp) pool.push_back(j);
    }
    if (pool.size() < distractors) {
      ++out.skipped;
      continue;
    }
    // Partial Fisher-Yates: the first `distractors` slots are the sample.
    for (std::size_t s = 0; s < distractors; ++s) {
      std::swap(pool[s], pool[s + rng.uniform_int(pool.size() - s)]);
    }
    TripletRecord t;
    t.video_id = a.video_id;
    t.anchor_frame = i;
    t.candidates.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(distractors));
    t.target_index = rng.uniform_int(distractors + 1);
    t.candidates.insert(t.candidates.begin() + static_cast<std::ptrdiff_t>(t.target_index), i + 1);
    out.triplets.push_back(std::move(t));
  }
  return out;
}

// Empty string when the triplet is valid, else the first violated rule.
inline std::string validate_triplet(const TripletRecord& t, const std::vector<std::size_t>& labels,
                                    std::size_t candidates = 10) {
  if (t.candidates.size() != candidates) return "wrong candidate count";
  if (t.target_index >= t.candidates.size()) return "target index out of range";
  if (t.anchor_frame + 1 >= labels.size()) return "anchor has no successor";
  if (t.candidates[t.target_index] != t.anchor_frame + 1) return "target is not the next frame";
  std::size_t positives = 0;
  const std::size_t ca = labels[t.anchor_frame], cp = labels[t.anchor_frame + 1];
  for (std::size_t i = 0; i < t.candidates.size(); ++i) {
    const std::size_t c = t.candidates[i];
    if (c >= labels.size()) return "candidate frame out of range";
    if (c == t.anchor_frame + 1) ++positives;
    if (i == t.target_index) continue;
    if (labels[c] == ca || labels[c] == cp) return "distractor shares a cluster with anchor or positive";
    for (std::size_t j = 0; j < i; ++j) {
      if (t.candidates[j] == c) return "duplicate candidate";
    }
  }
  if (positives != 1) return "positive must appear exactly once";
  return {};
}

}  // namespace concertcut::cluster
