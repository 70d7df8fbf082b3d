#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "concertcut/audio/log_mel.hpp"
#include "concertcut/temporal/model.hpp"
#include "concertcut/temporal/time_label.hpp"

namespace concertcut::temporal {

struct StreamConfig {
  double threshold = 0.5;
  double refractory_s = 2.0;
};

// Online cut emission over consecutive windows starting at i * hop. `score`
// is called as score(window_index, start_s, l_seg) -> probability, where l_seg
// is measured from the last emitted cut (the stream start before any cut).
// A positive window emits a cut at start + hop unless it falls within the
// refractory period of the previous emitted cut.
template <class Scorer>
std::vector<double> predict_stream(std::size_t n_windows, Scorer&& score, const SceneStats& stats,
                                   const StreamConfig& cfg = {}, double hop_s = audio::kHopSeconds) {
  std::vector<double> cuts;
  std::optional<double> last;
  for (std::size_t w = 0; w < n_windows; ++w) {
    const double start = static_cast<double>(w) * hop_s;
    const auto alpha_seg = std::llround(start * audio::kSampleRate);
    const auto alpha_shot = std::min<std::int64_t>(alpha_seg, last ? std::llround(*last * audio::kSampleRate) : 0);
    const double l_seg = time_label(alpha_seg, alpha_shot, stats);
    const double p = score(w, start, l_seg);
    if (p < cfg.threshold) continue;
    const double t = start + hop_s;
    if (last && t - *last < cfg.refractory_s) continue;
    cuts.push_back(t);
    last = t;
  }
  return cuts;
}

// Runs a trained model over every window of a clip.
inline std::vector<double> predict_clip(const TemporalModel& model, const audio::AudioClip& clip,
                                        const SceneStats& stats, const StreamConfig& cfg = {},
                                        const std::vector<std::vector<double>>& visual = {}) {
  const auto windows = audio::window_segments(clip);
  if (model.config().multimodal && visual.size() != windows.size()) {
    throw ContractError("multimodal stream needs one visual embedding per window");
  }
  return predict_stream(
      windows.size(),
      [&](std::size_t w, double, double l_seg) {
        const auto s = audio::segment_log_mel(clip, windows[w]);
        const std::span<const double> v = model.config().multimodal ? std::span<const double>(visual[w])
                                                                    : std::span<const double>{};
        return model.predict(s.values, l_seg, v);
      },
      stats, cfg);
}

}  // namespace concertcut::temporal
