#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "concertcut/audio/wav.hpp"
#include "concertcut/core/error.hpp"

namespace concertcut::temporal {

// Scene-duration statistics in 16 kHz sample units, taken from training videos.
struct SceneStats {
  double mean_samples = 0.0;
  double std_samples = 0.0;

  double mean_seconds() const { return mean_samples / audio::kSampleRate; }

  void validate() const {
    if (!(mean_samples > 0.0) || !std::isfinite(mean_samples)) {
      throw DegenerateError("scene stats: mean must be > 0");
    }
    if (!(std_samples > 0.0) || !std::isfinite(std_samples)) {
      throw DegenerateError("scene stats: std must be > 0");
    }
  }
};

struct SegmentRecord {
  std::string video_id;
  double start_s = 0.0;
  int label = 0;
  double l_seg = 0.0;
  std::int64_t alpha_seg = 0;
  std::int64_t alpha_shot = 0;
};

// Standardized samples elapsed since the last cut.
inline double time_label(std::int64_t alpha_seg, std::int64_t alpha_shot, const SceneStats& stats) {
  if (alpha_shot > alpha_seg) throw ContractError("time_label: alpha_shot after alpha_seg");
  stats.validate();
  return (static_cast<double>(alpha_seg - alpha_shot) - stats.mean_samples) / stats.std_samples;
}

// Mean and population std of the gaps between consecutive cuts, each list
// holding one video's sorted cut times in seconds.
inline SceneStats scene_stats_from_cuts(const std::vector<std::vector<double>>& cuts_per_video) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& cuts : cuts_per_video) {
    for (std::size_t i = 1; i < cuts.size(); ++i) {
      const double gap = (cuts[i] - cuts[i - 1]) * audio::kSampleRate;
      sum += gap;
      sq += gap * gap;
      ++n;
    }
  }
  if (n == 0) throw DegenerateError("scene stats: no cut intervals in the training videos");
  SceneStats s;
  s.mean_samples = sum / static_cast<double>(n);
  s.std_samples = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - s.mean_samples * s.mean_samples));
  s.validate();
  return s;
}

// Labels the 4 s / 2 s windows of one video from its confirmed cut times.
// alpha_seg is the window start; alpha_shot the last cut at or before it
// (the video start if none).
inline std::vector<SegmentRecord> label_segments(const std::string& video_id, double duration_s,
                                                 std::span<const double> cuts, const SceneStats& stats,
                                                 double segment_s = 4.0, double hop_s = 2.0) {
  std::vector<SegmentRecord> out;
  for (std::size_t w = 0;; ++w) {
    const double start = static_cast<double>(w) * hop_s;
    if (start + segment_s > duration_s + 1e-9) break;
    SegmentRecord r;
    r.video_id = video_id;
    r.start_s = start;
    r.alpha_seg = std::llround(start * audio::kSampleRate);
    double last = 0.0;
    for (double c : cuts) {
      if (c >= start && c < start + segment_s) r.label = 1;
      if (c <= start) last = std::max(last, c);
    }
    r.alpha_shot = std::llround(last * audio::kSampleRate);
    r.l_seg = time_label(r.alpha_seg, r.alpha_shot, stats);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace concertcut::temporal
