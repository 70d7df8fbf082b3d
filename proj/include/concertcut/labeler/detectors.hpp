#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "concertcut/labeler/frames.hpp"

namespace concertcut::labeler {

enum class CutSource { frame_diff, embedding, adaptive, oracle_confirmed };

inline const char* to_string(CutSource s) {
  switch (s) {
    case CutSource::frame_diff: return "frame_diff";
    case CutSource::embedding: return "embedding";
    case CutSource::adaptive: return "adaptive";
    case CutSource::oracle_confirmed: return "oracle_confirmed";
  }
  return "?";
}

inline CutSource cut_source_from_string(const std::string& s) {
  if (s == "frame_diff") return CutSource::frame_diff;
  if (s == "embedding") return CutSource::embedding;
  if (s == "adaptive") return CutSource::adaptive;
  if (s == "oracle_confirmed") return CutSource::oracle_confirmed;
  throw DataFormatError("unknown cut source '" + s + "'");
}

struct CutEvent {
  std::string video_id;
  double time_s = 0.0;
  CutSource source = CutSource::frame_diff;
  bool confirmed = false;
  std::size_t frame = 0;                 // first frame after the change
  std::size_t representative_frame = 0;  // frame_diff only: ~2 s before the change
  bool auto_accept = false;              // embedding similarity below the low bound
};

// Consecutive-frame grayscale differencing. Each event's representative frame
// sits round(2 * fps) frames before the detection.
inline std::vector<CutEvent> frame_diff_detect(const FrameSequence& seq, double threshold = 25.0) {
  if (seq.frames.empty()) throw ContractError("frame_diff_detect: empty frame sequence");
  seq.validate();
  std::vector<CutEvent> out;
  const auto back = static_cast<std::size_t>(std::llround(2.0 * seq.fps));
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (mean_abs_gray_diff(seq.frames[i - 1], seq.frames[i]) > threshold) {
      CutEvent e;
      e.video_id = seq.video_id;
      e.frame = i;
      e.time_s = static_cast<double>(i) / seq.fps;
      e.representative_frame = i >= back ? i - back : 0;
      e.source = CutSource::frame_diff;
      out.push_back(std::move(e));
    }
  }
  return out;
}

enum class Boundary { no_cut, accepted_cut, uncertain };

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_similarity: zero-norm embedding");
  return dot / std::sqrt(na * nb);
}

// One class per adjacent pair (i, i+1).
inline std::vector<Boundary> cosine_boundary(const std::vector<std::vector<double>>& embeddings,
                                             double hi = 0.95, double lo = 0.8) {
  if (embeddings.size() < 2) throw ContractError("cosine_boundary: need at least 2 embeddings");
  if (lo > hi) throw ConfigError("cosine_boundary: lo must not exceed hi");
  std::vector<Boundary> out;
  for (std::size_t i = 0; i + 1 < embeddings.size(); ++i) {
    const double s = cosine_similarity(embeddings[i], embeddings[i + 1]);
    out.push_back(s > hi ? Boundary::no_cut : s < lo ? Boundary::accepted_cut : Boundary::uncertain);
  }
  return out;
}

inline std::vector<CutEvent> embedding_events(const std::string& video_id, double fps,
                                              const std::vector<Boundary>& pairs) {
  std::vector<CutEvent> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i] == Boundary::no_cut) continue;
    CutEvent e;
    e.video_id = video_id;
    e.frame = i + 1;
    e.time_s = static_cast<double>(i + 1) / fps;
    e.source = CutSource::embedding;
    e.auto_accept = pairs[i] == Boundary::accepted_cut;
    out.push_back(std::move(e));
  }
  return out;
}

// Hexcone HSV with every channel scaled to 0..255.
inline void rgb_to_hsv255(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8, double out[3]) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0) {
    if (mx == r) h = std::fmod((g - b) / d + 6.0, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
  }
  out[0] = h / 6.0 * 255.0;
  out[1] = mx > 0 ? d / mx * 255.0 : 0.0;
  out[2] = mx * 255.0;
}

inline double mean_abs_hsv_diff(const Frame& a, const Frame& b) {
  if (a.pixels() != b.pixels() || a.pixels() == 0) throw DimensionError("frame size mismatch");
  double s = 0.0;
  double ha[3], hb[3];
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    rgb_to_hsv255(a.rgb[3 * i], a.rgb[3 * i + 1], a.rgb[3 * i + 2], ha);
    rgb_to_hsv255(b.rgb[3 * i], b.rgb[3 * i + 1], b.rgb[3 * i + 2], hb);
    s += std::abs(ha[0] - hb[0]) + std::abs(ha[1] - hb[1]) + std::abs(ha[2] - hb[2]);
  }
  return s / (3.0 * static_cast<double>(a.pixels()));
}

// score_i is the HSV delta to the previous frame; it is divided by the mean
// score of the +-window neighbours (self excluded, floor 1e-6) and an event is
// raised when (score_i / 255) * ratio_i exceeds the threshold.
inline std::vector<CutEvent> adaptive_hsv_detect(const FrameSequence& seq, double threshold = 0.5,
                                                 std::size_t window = 2) {
  const std::size_t n = seq.frames.size();
  if (n < 2 * window + 2) {
    throw ContractError("adaptive_hsv_detect: need at least " + std::to_string(2 * window + 2) + " frames");
  }
  seq.validate();
  std::vector<double> score(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) score[i] = mean_abs_hsv_diff(seq.frames[i - 1], seq.frames[i]);
  std::vector<CutEvent> out;
  for (std::size_t i = 1; i < n; ++i) {
    double sum = 0.0;
    std::size_t cnt = 0;
    const std::size_t lo = i > window ? i - window : 1;
    const std::size_t hi = std::min(n - 1, i + window);
    for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
      if (j == i) continue;
      sum += score[j];
      ++cnt;
    }
    const double neighbour = cnt ? sum / static_cast<double>(cnt) : 0.0;
    const double ratio = score[i] / std::max(neighbour, 1e-6);
    if (score[i] / 255.0 * ratio > threshold) {
      CutEvent e;
      e.video_id = seq.video_id;
      e.frame = i;
      e.time_s = static_cast<double>(i) / seq.fps;
      e.source = CutSource::adaptive;
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace concertcut::labeler
