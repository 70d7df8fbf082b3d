#pragma once

#include <algorithm>
#include <array>
#include <exception>
#include <vector>

#include "concertcut/labeler/detectors.hpp"

namespace concertcut::labeler {

enum class Verdict { is_cut, not_cut };

// Second opinion on a candidate cut from the five frames centred on it.
class CutOracle {
 public:
  virtual ~CutOracle() = default;
  virtual Verdict query(const std::array<const Frame*, 5>& frames) = 0;
};

// Deterministic stand-in: a cut iff the middle pair (frames 1 and 2, the two
// frames either side of the change) differ by more than 25 gray levels.
class MockOracle : public CutOracle {
 public:
  explicit MockOracle(double threshold = 25.0) : threshold_(threshold) {}
  Verdict query(const std::array<const Frame*, 5>& f) override {
    return mean_abs_gray_diff(*f[1], *f[2]) > threshold_ ? Verdict::is_cut : Verdict::not_cut;
  }

 private:
  double threshold_;
};

class ConstantOracle : public CutOracle {
 public:
  explicit ConstantOracle(Verdict v) : v_(v) {}
  Verdict query(const std::array<const Frame*, 5>&) override { return v_; }

 private:
  Verdict v_;
};

inline constexpr double kDedupWindowS = 0.4;

// Sorted by time, keeping the first of any run closer than `window` to the
// last kept event.
inline std::vector<CutEvent> dedup_events(std::vector<CutEvent> events, double window = kDedupWindowS) {
  std::stable_sort(events.begin(), events.end(),
                   [](const CutEvent& a, const CutEvent& b) { return a.time_s < b.time_s; });
  std::vector<CutEvent> out;
  for (auto& e : events) {
    if (!out.empty() && e.time_s - out.back().time_s < window - 1e-9) continue;
    out.push_back(std::move(e));
  }
  return out;
}

struct ConfirmResult {
  std::vector<CutEvent> confirmed;
  std::vector<CutEvent> unresolved;  // oracle failed; confirmed == false
};

// Auto-accepted embedding events pass directly; every other candidate is sent
// to the oracle with frames [i-2, i+2] (clamped to the sequence).
inline ConfirmResult confirm_cuts(const FrameSequence& seq, const std::vector<CutEvent>& candidates,
                                  CutOracle& oracle, double dedup_window = kDedupWindowS) {
  ConfirmResult r;
  std::vector<CutEvent> accepted;
  for (const auto& c : candidates) {
    CutEvent e = c;
    if (c.auto_accept) {
      e.confirmed = true;
      accepted.push_back(std::move(e));
      continue;
    }
    if (seq.frames.empty()) {
      r.unresolved.push_back(std::move(e));
      continue;
    }
    std::array<const Frame*, 5> five{};
    const auto last = static_cast<std::ptrdiff_t>(seq.frames.size()) - 1;
    for (std::ptrdiff_t k = 0; k < 5; ++k) {
      const auto idx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(c.frame) - 2 + k, 0, last);
      five[static_cast<std::size_t>(k)] = &seq.frames[static_cast<std::size_t>(idx)];
    }
    try {
      if (oracle.query(five) == Verdict::is_cut) {
        e.confirmed = true;
        e.source = CutSource::oracle_confirmed;
        accepted.push_back(std::move(e));
      }
    } catch (const std::exception&) {
      e.confirmed = false;
      r.unresolved.push_back(std::move(e));
    }
  }
  r.confirmed = dedup_events(std::move(accepted), dedup_window);
  return r;
}

}  // namespace concertcut::labeler
