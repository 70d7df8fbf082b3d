#pragma once

// End-to-end editing for one video: the temporal model decides when to cut,
// the matching module picks which pseudo-shot to cut to.

#include <optional>
#include <string>
#include <vector>

#include "concertcut/cluster/clustering.hpp"
#include "concertcut/io/edl.hpp"
#include "concertcut/selector/selector.hpp"
#include "concertcut/temporal/stream.hpp"

namespace concertcut::pipeline {

struct EditInputs {
  std::string video_id;
  const cluster::Matrix* embeddings = nullptr;  // frames x D
  const cluster::ClusterAssignment* clusters = nullptr;
  double fps = 5.0;
};

inline std::vector<double> embedding_row(const cluster::Matrix& m, std::size_t f) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(static_cast<Eigen::Index>(f), c);
  return v;
}

inline std::size_t frame_at(double t, double fps, std::size_t n_frames) {
  const auto f = static_cast<std::size_t>(std::max<long long>(0, std::llround(t * fps)));
  return std::min(f, n_frames - 1);
}

// Candidates for an anchor: the medoid of every other cluster, padded with
// frames sampled from those clusters until there are `min_candidates`. When
// the other clusters hold fewer frames than that, samples repeat.
inline std::vector<std::size_t> edit_candidates(const std::vector<std::size_t>& labels,
                                                const std::vector<std::size_t>& medoid_frames, std::size_t anchor,
                                                std::size_t min_candidates, Rng& rng) {
  const std::size_t own = labels[anchor];
  std::vector<std::size_t> out, pool;
  for (std::size_t c = 0; c < medoid_frames.size(); ++c) {
    if (c != own) out.push_back(medoid_frames[c]);
  }
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (labels[f] != own && std::find(out.begin(), out.end(), f) == out.end()) pool.push_back(f);
  }
  rng.shuffle(pool);
  for (std::size_t i = 0; out.size() < min_candidates; ++i) {
    out.push_back(pool.empty() ? out[i % out.size()] : pool[i % pool.size()]);
  }
  return out;
}

// Returns nothing when the video has fewer than two clusters.
template <class Warn>
std::optional<io::EditDecisionList> edit_from_cuts(const std::vector<double>& cut_times, const EditInputs& in,
                                                   const selector::MatchingModule& sel, std::uint64_t seed,
                                                   Warn&& log_warning) {
  const auto& labels = in.clusters->labels;
  const auto& emb = *in.embeddings;
  if (labels.empty() || static_cast<std::size_t>(emb.rows()) != labels.size()) {
    throw DimensionError("edit: " + in.video_id + " has " + std::to_string(emb.rows()) + " embeddings but " +
                         std::to_string(labels.size()) + " cluster labels");
  }
  if (cluster::cluster_count(labels) < 2) {
    log_warning("skipping " + in.video_id + ": fewer than 2 clusters");
    return std::nullopt;
  }
  const auto med = cluster::medoids(emb, labels);
  Rng rng(derive_seed(seed, in.video_id, 0xed17));
  auto row = [&](std::size_t f) { return embedding_row(emb, f); };

  io::EditDecisionList edl;
  edl.video_id = in.video_id;
  edl.entries.push_back({0.0, labels[0], 0});
  for (double t : cut_times) {
    const std::size_t anchor = frame_at(t, in.fps, labels.size());
    const auto cands = edit_candidates(labels, med, anchor, sel.config().candidates, rng);
    std::vector<std::vector<double>> vecs;
    for (auto f : cands) vecs.push_back(row(f));
    const auto s = sel.score_candidates(row(anchor), vecs);
    const auto best = static_cast<std::size_t>(std::max_element(s.logits.begin(), s.logits.end()) - s.logits.begin());
    edl.entries.push_back({t, labels[cands[best]], cands[best]});
  }
  edl.validate();
  return edl;
}

struct EditConfig {
  temporal::StreamConfig stream;
};

template <class Warn>
std::optional<io::EditDecisionList> edit_run(const audio::AudioClip& clip, const EditInputs& in,
                                             const temporal::TemporalModel& model, const temporal::SceneStats& stats,
                                             const selector::MatchingModule& sel, const EditConfig& cfg,
                                             std::uint64_t seed, Warn&& warn) {
  std::vector<std::vector<double>> visual;
  if (model.config().multimodal) {
    for (const auto& w : audio::window_segments(clip)) {
      const std::size_t f = frame_at(w.start_s + audio::kSegmentSeconds / 2, in.fps,
                                     static_cast<std::size_t>(in.embeddings->rows()));
      visual.push_back(embedding_row(*in.embeddings, f));
    }
  }
  const auto cuts = temporal::predict_clip(model, clip, stats, cfg.stream, visual);
  return edit_from_cuts(cuts, in, sel, seed, warn);
}

}  // namespace concertcut::pipeline
