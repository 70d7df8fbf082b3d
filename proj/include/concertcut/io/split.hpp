#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "concertcut/core/rng.hpp"
#include "concertcut/io/records.hpp"

namespace concertcut::io {

inline constexpr double kTestFraction = 0.15;
inline constexpr double kSpatialValFraction = 0.15;
inline constexpr double kTemporalTrainFraction = 0.8;

// Nearest integer, at least 1.
inline std::size_t split_count(std::size_t n, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction)));
}

using VideoSplits = std::map<std::string, Split>;

namespace detail {

inline std::vector<std::string> shuffled_ids(const std::vector<ManifestEntry>& manifest, std::uint64_t seed,
                                             std::string_view purpose) {
  std::vector<std::string> ids;
  for (const auto& e : manifest) ids.push_back(e.video_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ContractError("split: duplicate video ids in manifest");
  }
  Rng rng(derive_seed(seed, purpose));
  rng.shuffle(ids);
  return ids;
}

}  // namespace detail

struct TemporalSplit {
  VideoSplits videos;             // test, or train for every other video
  std::vector<Split> segments;    // aligned with the input segments
};

// Test videos are drawn first; every segment of the remaining videos is then
// split 80/20 into train/val separately for each label.
inline TemporalSplit split_temporal(const std::vector<ManifestEntry>& manifest,
                                    const std::vector<temporal::SegmentRecord>& segments, std::uint64_t seed) {
  if (manifest.size() < 20) {
    throw ContractError("split_temporal needs at least 20 videos, got " + std::to_string(manifest.size()));
  }
  const auto ids = detail::shuffled_ids(manifest, seed, "split-temporal");
  const std::size_t n_test = split_count(ids.size(), kTestFraction);
  TemporalSplit out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.videos[ids[i]] = i < n_test ? Split::test : Split::train;

  out.segments.assign(segments.size(), Split::unassigned);
  std::vector<std::size_t> by_label[2];
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto it = out.videos.find(segments[i].video_id);
    if (it == out.videos.end()) {
      throw ContractError("segment of unknown video '" + segments[i].video_id + "'");
    }
    if (it->second == Split::test) {
      out.segments[i] = Split::test;
    } else {
      by_label[segments[i].label != 0].push_back(i);
    }
  }
  Rng rng(derive_seed(seed, "split-temporal-segments"));
  for (auto& group : by_label) {
    rng.shuffle(group);
    const auto n_train = static_cast<std::size_t>(
        std::llround(static_cast<double>(group.size()) * kTemporalTrainFraction));
    for (std::size_t j = 0; j < group.size(); ++j) out.segments[group[j]] = j < n_train ? Split::train : Split::val;
  }
  return out;
}

// 15% test, 15% val, the rest train; splits are by video.
inline VideoSplits split_spatial(const std::vector<ManifestEntry>& manifest, std::uint64_t seed) {
  if (manifest.size() < 7) {
    throw ContractError("split_spatial needs at least 7 videos, got " + std::to_string(manifest.size()));
  }
  const auto ids = detail::shuffled_ids(manifest, seed, "split-spatial");
  const std::size_t n_test = split_count(ids.size(), kTestFraction);
  const std::size_t n_val = split_count(ids.size(), kSpatialValFraction);
  VideoSplits out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out[ids[i]] = i < n_test ? Split::test : i < n_test + n_val ? Split::val : Split::train;
  }
  return out;
}

// Number of items from test videos placed outside test, or from non-test
// videos placed in test. With `exact`, any item whose split differs from its
// video's split counts.
inline std::size_t count_leaks(const VideoSplits& videos, const std::vector<std::string>& item_videos,
                               const std::vector<Split>& item_splits, bool exact = false) {
  if (item_videos.size() != item_splits.size()) throw DimensionError("count_leaks: length mismatch");
  std::size_t leaks = 0;
  for (std::size_t i = 0; i < item_videos.size(); ++i) {
    const auto it = videos.find(item_videos[i]);
    if (it == videos.end()) {
      ++leaks;
      continue;
    }
    if (exact ? it->second != item_splits[i] : (it->second == Split::test) != (item_splits[i] == Split::test)) {
      ++leaks;
    }
  }
  return leaks;
}

}  // namespace concertcut::io
