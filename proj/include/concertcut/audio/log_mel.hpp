#pragma once

#include <Eigen/Core>
#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "concertcut/audio/wav.hpp"
#include "concertcut/core/error.hpp"

namespace concertcut::audio {

// Transform parameters chosen so that a 4 s segment at 16 kHz yields exactly
// 128 x 400 (401 centred frames, the last one cropped).
struct MelConfig {
  static constexpr std::size_t kSegmentSamples = 64000;
  static constexpr std::size_t kWindow = 400;
  static constexpr std::size_t kHop = 160;
  static constexpr std::size_t kFft = 512;
  static constexpr std::size_t kBins = kFft / 2 + 1;
  static constexpr std::size_t kMels = 128;
  static constexpr std::size_t kFrames = 400;
  static constexpr double kFmin = 0.0;
  static constexpr double kFmax = 8000.0;
  static constexpr double kLogOffset = 1e-6;
};

inline constexpr double kSegmentSeconds = 4.0;
inline constexpr double kHopSeconds = 2.0;

// Row-major [mels x frames] log-mel energies.
struct Spectrogram {
  std::size_t mels = MelConfig::kMels;
  std::size_t frames = MelConfig::kFrames;
  std::vector<double> values;

  double at(std::size_t mel, std::size_t frame) const { return values[mel * frames + frame]; }
  double& at(std::size_t mel, std::size_t frame) { return values[mel * frames + frame]; }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Corner frequencies of the triangular filters: kMels + 2 points evenly spaced
// on the HTK mel scale; filter m peaks at point m + 1.
inline std::vector<double> mel_points_hz() {
  const double lo = hz_to_mel(MelConfig::kFmin), hi = hz_to_mel(MelConfig::kFmax);
  std::vector<double> pts(MelConfig::kMels + 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(pts.size() - 1));
  }
  return pts;
}

// [kMels x kBins] unnormalized triangular weights.
inline std::vector<double> mel_filterbank() {
  const auto pts = mel_points_hz();
  std::vector<double> fb(MelConfig::kMels * MelConfig::kBins, 0.0);
  const double bin_hz = 16000.0 / static_cast<double>(MelConfig::kFft);
  for (std::size_t m = 0; m < MelConfig::kMels; ++m) {
    for (std::size_t k = 0; k < MelConfig::kBins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double up = (f - pts[m]) / (pts[m + 1] - pts[m]);
      const double down = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
      fb[m * MelConfig::kBins + k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

// Periodic Hann window of kWindow samples, zero-padded to kFft and centred.
inline std::vector<double> padded_hann() {
  std::vector<double> w(MelConfig::kFft, 0.0);
  const std::size_t off = (MelConfig::kFft - MelConfig::kWindow) / 2;
  for (std::size_t n = 0; n < MelConfig::kWindow; ++n) {
    w[off + n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                      static_cast<double>(MelConfig::kWindow));
  }
  return w;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Owns an r2c plan for kFft points. Planning is serialized because FFTW's
// planner is not thread-safe; execution on private buffers is.
class RealFft {
 public:
  RealFft() {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * MelConfig::kFft));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * MelConfig::kBins));
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(MelConfig::kFft), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_, MelConfig::kFft}; }

  // |X_k|^2 for k = 0 .. kFft/2
  void power(std::span<double> out) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k < MelConfig::kBins; ++k) {
      out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_{};
};

inline RealFft& thread_fft() {
  thread_local RealFft fft;
  return fft;
}

inline double reflect_at(std::span<const float> x, std::ptrdiff_t i) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<double>(x[static_cast<std::size_t>(i)]);
}

}  // namespace detail

// Power spectrogram, [frames x kBins], with reflect-padded centred frames:
// 1 + len / hop frames in total.
inline std::vector<double> stft_power(std::span<const float> samples, std::size_t* n_frames = nullptr) {
  if (samples.size() <= MelConfig::kFft / 2) {
    throw DimensionError("stft input shorter than half an FFT frame");
  }
  const std::size_t frames = 1 + samples.size() / MelConfig::kHop;
  static const std::vector<double> window = padded_hann();
  auto& fft = detail::thread_fft();
  std::vector<double> out(frames * MelConfig::kBins);
  const auto half = static_cast<std::ptrdiff_t>(MelConfig::kFft / 2);
  for (std::size_t t = 0; t < frames; ++t) {
    auto in = fft.input();
    const auto start = static_cast<std::ptrdiff_t>(t * MelConfig::kHop) - half;
    for (std::size_t n = 0; n < MelConfig::kFft; ++n) {
      in[n] = window[n] == 0.0 ? 0.0
                               : window[n] * detail::reflect_at(samples, start + static_cast<std::ptrdiff_t>(n));
    }
    fft.power(std::span<double>(out.data() + t * MelConfig::kBins, MelConfig::kBins));
  }
  if (n_frames) *n_frames = frames;
  return out;
}

// 4 s of 16 kHz audio -> 128 x 400 log-mel spectrogram.
inline Spectrogram log_mel(std::span<const float> segment) {
  if (segment.size() != MelConfig::kSegmentSamples) {
    throw DimensionError("log_mel expects " + std::to_string(MelConfig::kSegmentSamples) +
                         " samples, got " + std::to_string(segment.size()));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // Owned (aligned) Eigen storage keeps the product independent of where the
  // input buffers happen to live.
  static const RowMat w = Eigen::Map<const RowMat>(mel_filterbank().data(), MelConfig::kMels, MelConfig::kBins);
  const auto power = stft_power(segment);
  const RowMat p = Eigen::Map<const RowMat>(power.data(), MelConfig::kFrames, MelConfig::kBins);
  const RowMat prod = w * p.transpose();
  Spectrogram s;
  s.values.assign(prod.data(), prod.data() + prod.size());
  for (double& v : s.values) v = std::log(v + MelConfig::kLogOffset);
  return s;
}

// Zero-mean, unit-variance copy (off by default in the model pipeline).
inline Spectrogram standardized(Spectrogram s) {
  double mu = 0.0;
  for (double v : s.values) mu += v;
  mu /= static_cast<double>(s.values.size());
  double var = 0.0;
  for (double v : s.values) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / static_cast<double>(s.values.size()));
  for (double& v : s.values) v = sd > 0 ? (v - mu) / sd : 0.0;
  return s;
}

struct SegmentWindow {
  std::string video_id;
  double start_s = 0.0;
  static constexpr double duration_s = kSegmentSeconds;
  static constexpr double hop_s = kHopSeconds;

  std::size_t start_sample() const {
    return static_cast<std::size_t>(std::llround(start_s * kSampleRate));
  }
};

// Windows of 4 s every 2 s that fit entirely inside the clip.
inline std::vector<SegmentWindow> window_segments(const AudioClip& clip, const std::string& video_id = {}) {
  validate(clip);
  constexpr std::size_t seg = MelConfig::kSegmentSamples;
  constexpr std::size_t hop = 2 * kSampleRate;
  if (clip.samples.size() < seg) {
    throw ContractError("clip too short: " + std::to_string(clip.duration_s()) + " s < 4 s");
  }
  std::vector<SegmentWindow> out;
  for (std::size_t start = 0; start + seg <= clip.samples.size(); start += hop) {
    out.push_back({video_id, static_cast<double>(start) / kSampleRate});
  }
  return out;
}

inline Spectrogram segment_log_mel(const AudioClip& clip, const SegmentWindow& w) {
  const auto start = w.start_sample();
  if (start + MelConfig::kSegmentSamples > clip.samples.size()) {
    throw ContractError("segment does not fit inside clip");
  }
  return log_mel(std::span<const float>(clip.samples).subspan(start, MelConfig::kSegmentSamples));
}

}  // namespace concertcut::audio
