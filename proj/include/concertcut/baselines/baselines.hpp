#pragma once

#include <cmath>
#include <cstdint>

#include "concertcut/core/error.hpp"
#include "concertcut/core/rng.hpp"
#include "concertcut/temporal/time_label.hpp"

namespace concertcut::baselines {

// Expected number of cuts in a window of t_window seconds.
struct PoissonBaseline {
  double t_window = 4.0;
  double mean_scene_s = 0.0;

  double lambda() const { return t_window / mean_scene_s; }

  void validate() const {
    if (!(t_window > 0) || !(mean_scene_s > 0) || !std::isfinite(lambda())) {
      throw ConfigError("poisson baseline needs positive window and mean scene duration");
    }
  }

  static PoissonBaseline from_stats(const temporal::SceneStats& stats, double t_window = 4.0) {
    stats.validate();
    PoissonBaseline b{t_window, stats.mean_seconds()};
    b.validate();
    return b;
  }
};

struct ExponentialBaseline {
  double alpha = 0.0;  // 1 / mean scene duration in seconds

  void validate() const {
    if (!(alpha > 0) || !std::isfinite(alpha)) throw ConfigError("exponential baseline needs alpha > 0");
  }

  static ExponentialBaseline from_stats(const temporal::SceneStats& stats) {
    stats.validate();
    ExponentialBaseline b{1.0 / stats.mean_seconds()};
    b.validate();
    return b;
  }
};

// Poisson draw by inversion: walk the CDF with p_k = p_{k-1} * lambda / k.
inline std::uint64_t poisson_draw(double lambda, Rng& rng) {
  const double u = rng.uniform();
  double p = std::exp(-lambda);
  double cdf = p;
  std::uint64_t k = 0;
  while (u >= cdf && p > 0.0) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

inline int poisson_classify(double lambda, Rng& rng) { return poisson_draw(lambda, rng) > 0 ? 1 : 0; }

inline int poisson_classify(const PoissonBaseline& b, std::uint64_t seed) {
  b.validate();
  Rng rng(seed);
  return poisson_classify(b.lambda(), rng);
}

inline double poisson_score(double lambda) {
  if (lambda < 0 || std::isnan(lambda)) throw ContractError("poisson_score: lambda must be >= 0");
  return -std::expm1(-lambda);
}

inline double poisson_score(const PoissonBaseline& b) {
  b.validate();
  return poisson_score(b.lambda());
}

inline double exponential_draw(double alpha, Rng& rng) { return -std::log1p(-rng.uniform()) / alpha; }

// Cut iff the elapsed scene time is shorter than an exponential draw.
inline int exponential_classify(const ExponentialBaseline& b, double t_scene_s, Rng& rng) {
  if (t_scene_s < 0 || std::isnan(t_scene_s)) throw ContractError("exponential_classify: t_scene must be >= 0");
  return t_scene_s < exponential_draw(b.alpha, rng) ? 1 : 0;
}

inline int exponential_classify(const ExponentialBaseline& b, double t_scene_s, std::uint64_t seed) {
  b.validate();
  Rng rng(seed);
  return exponential_classify(b, t_scene_s, rng);
}

inline double exponential_score(const ExponentialBaseline& b, double t_scene_s) {
  b.validate();
  if (t_scene_s < 0 || std::isnan(t_scene_s)) throw ContractError("exponential_score: t_scene must be >= 0");
  return -std::expm1(-b.alpha * t_scene_s);
}

// Seconds since the last cut for a labeled window.
inline double elapsed_scene_seconds(const temporal::SegmentRecord& r) {
  return static_cast<double>(r.alpha_seg - r.alpha_shot) / audio::kSampleRate;
}

}  // namespace concertcut::baselines
