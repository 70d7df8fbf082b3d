#pragma once

#include <cmath>
#include <cstdint>

#include "concertcut/audio/log_mel.hpp"
#include "concertcut/core/rng.hpp"

namespace concertcut::audio {

struct SpecAugmentConfig {
  std::size_t time_masks = 2;
  std::size_t freq_masks = 2;
  std::size_t max_time_width = 40;
  std::size_t max_freq_width = 16;
  // Uniform noise amplitude as a fraction of the spectrogram's std.
  double noise_ratio = 0.05;
};

// Time and frequency masking (masked cells take the pre-mask mean) followed by
// elementwise uniform noise in [-noise_amp, +noise_amp].
inline Spectrogram spec_augment(const Spectrogram& s, std::size_t time_masks, std::size_t freq_masks,
                                std::size_t max_t, std::size_t max_f, double noise_amp,
                                std::uint64_t seed) {
  if (max_t >= s.frames) {
    throw ConfigError("time mask width " + std::to_string(max_t) + " must be < " + std::to_string(s.frames));
  }
  if (max_f >= s.mels) {
    throw ConfigError("frequency mask width " + std::to_string(max_f) + " must be < " +
                      std::to_string(s.mels));
  }
  if (noise_amp < 0 || !std::isfinite(noise_amp)) throw ConfigError("noise amplitude must be finite and >= 0");
  Spectrogram out = s;
  if (time_masks == 0 && freq_masks == 0 && noise_amp == 0.0) return out;

  Rng rng(seed);
  double mu = 0.0;
  for (double v : s.values) mu += v;
  mu /= static_cast<double>(s.values.size());

  for (std::size_t m = 0; m < time_masks; ++m) {
    const std::size_t w = rng.uniform_int(max_t + 1);
    const std::size_t t0 = rng.uniform_int(s.frames - w + 1);
    for (std::size_t f = 0; f < s.mels; ++f) {
      for (std::size_t t = t0; t < t0 + w; ++t) out.at(f, t) = mu;
    }
  }
  for (std::size_t m = 0; m < freq_masks; ++m) {
    const std::size_t w = rng.uniform_int(max_f + 1);
    const std::size_t f0 = rng.uniform_int(s.mels - w + 1);
    for (std::size_t f = f0; f < f0 + w; ++f) {
      for (std::size_t t = 0; t < s.frames; ++t) out.at(f, t) = mu;
    }
  }
  if (noise_amp > 0.0) {
    for (double& v : out.values) v += rng.uniform(-noise_amp, noise_amp);
  }
  return out;
}

inline double spectrogram_std(const Spectrogram& s) {
  double mu = 0.0;
  for (double v : s.values) mu += v;
  mu /= static_cast<double>(s.values.size());
  double var = 0.0;
  for (double v : s.values) var += (v - mu) * (v - mu);
  return std::sqrt(var / static_cast<double>(s.values.size()));
}

inline Spectrogram spec_augment(const Spectrogram& s, const SpecAugmentConfig& cfg, std::uint64_t seed) {
  return spec_augment(s, cfg.time_masks, cfg.freq_masks, cfg.max_time_width, cfg.max_freq_width,
                      cfg.noise_ratio * spectrogram_std(s), seed);
}

}  // namespace concertcut::audio
