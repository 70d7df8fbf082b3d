#pragma once

// JSONL record streams: manifest, cut events, labelled segments, cluster
// assignments and triplets.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "concertcut/cluster/triplets.hpp"
#include "concertcut/io/tensor_file.hpp"
#include "concertcut/labeler/detectors.hpp"
#include "concertcut/temporal/time_label.hpp"

namespace concertcut::io {

using nlohmann::json;

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataFormatError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataFormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  write_atomically(path, [&](std::ostream& os) {
    for (const auto& r : rows) os << r.dump() << '\n';
  });
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataFormatError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataFormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_atomically(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

// Field access that reports schema problems as data-format errors.
template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataFormatError(std::string("record is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataFormatError(std::string("record field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

enum class Split { train, val, test, unassigned };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw DataFormatError("unknown split '" + s + "'");
}

struct ManifestEntry {
  std::string video_id;
  std::filesystem::path audio_path;
  std::filesystem::path frames_path;
  std::filesystem::path embeddings_path;
  double fps = 5.0;
  std::uint32_t sample_rate = 16000;
  Split split = Split::unassigned;
};

inline json to_json(const ManifestEntry& e) {
  return {{"video_id", e.video_id},
          {"audio_path", e.audio_path.string()},
          {"frames_path", e.frames_path.string()},
          {"embeddings_path", e.embeddings_path.string()},
          {"fps", e.fps},
          {"sample_rate", e.sample_rate},
          {"split", to_string(e.split)}};
}

// Relative paths resolve against `base` (the manifest's directory).
inline ManifestEntry manifest_entry_from_json(const json& j, const std::filesystem::path& base = {}) {
  ManifestEntry e;
  e.video_id = field<std::string>(j, "video_id");
  if (e.video_id.empty()) throw DataFormatError("manifest entry has an empty video_id");
  auto path = [&](const char* key) -> std::filesystem::path {
    const std::filesystem::path p = field_or<std::string>(j, key, "");
    return p.empty() || p.is_absolute() ? p : base / p;
  };
  e.audio_path = path("audio_path");
  e.frames_path = path("frames_path");
  e.embeddings_path = path("embeddings_path");
  e.fps = field_or<double>(j, "fps", 5.0);
  e.sample_rate = field_or<std::uint32_t>(j, "sample_rate", 16000);
  e.split = split_from_string(field_or<std::string>(j, "split", "unassigned"));
  if (!(e.fps > 0.0)) throw DataFormatError("manifest entry '" + e.video_id + "' has non-positive fps");
  if (e.sample_rate != 16000) {
    throw DataFormatError("manifest entry '" + e.video_id + "' sample_rate must be 16000");
  }
  return e;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::vector<ManifestEntry> out;
  for (const auto& j : read_jsonl(path)) out.push_back(manifest_entry_from_json(j, path.parent_path()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (out[k].video_id == out[i].video_id) throw DataFormatError("duplicate video_id '" + out[i].video_id + "'");
    }
  }
  return out;
}

inline json to_json(const labeler::CutEvent& c) {
  return {{"video_id", c.video_id}, {"time_s", c.time_s}, {"source", labeler::to_string(c.source)},
          {"confirmed", c.confirmed}};
}

inline labeler::CutEvent cut_from_json(const json& j) {
  labeler::CutEvent c;
  c.video_id = field<std::string>(j, "video_id");
  c.time_s = field<double>(j, "time_s");
  try {
    c.source = labeler::cut_source_from_string(field<std::string>(j, "source"));
  } catch (const ContractError& e) {
    throw DataFormatError(e.what());
  }
  c.confirmed = field<bool>(j, "confirmed");
  return c;
}

inline json to_json(const temporal::SegmentRecord& s) {
  return {{"video_id", s.video_id}, {"start_s", s.start_s},         {"label", s.label},
          {"l_seg", s.l_seg},       {"alpha_seg", s.alpha_seg},     {"alpha_shot", s.alpha_shot}};
}

inline temporal::SegmentRecord segment_from_json(const json& j) {
  temporal::SegmentRecord s;
  s.video_id = field<std::string>(j, "video_id");
  s.start_s = field<double>(j, "start_s");
  s.label = field<int>(j, "label");
  s.l_seg = field<double>(j, "l_seg");
  s.alpha_seg = field<std::int64_t>(j, "alpha_seg");
  s.alpha_shot = field<std::int64_t>(j, "alpha_shot");
  if (s.label != 0 && s.label != 1) throw DataFormatError("segment label must be 0 or 1");
  return s;
}

inline json to_json(const cluster::ClusterAssignment& a) {
  return {{"video_id", a.video_id}, {"k", a.k}, {"silhouette", a.silhouette}, {"labels", a.labels}};
}

inline cluster::ClusterAssignment cluster_from_json(const json& j) {
  cluster::ClusterAssignment a;
  a.video_id = field<std::string>(j, "video_id");
  a.k = field<std::size_t>(j, "k");
  a.silhouette = field<double>(j, "silhouette");
  a.labels = field<std::vector<std::size_t>>(j, "labels");
  for (auto l : a.labels) {
    if (l >= a.k) throw DataFormatError("cluster label out of range for '" + a.video_id + "'");
  }
  return a;
}

inline json to_json(const cluster::TripletRecord& t) {
  return {{"video_id", t.video_id},
          {"anchor_frame", t.anchor_frame},
          {"candidates", t.candidates},
          {"target_index", t.target_index}};
}

inline cluster::TripletRecord triplet_from_json(const json& j) {
  cluster::TripletRecord t;
  t.video_id = field<std::string>(j, "video_id");
  t.anchor_frame = field<std::size_t>(j, "anchor_frame");
  t.candidates = field<std::vector<std::size_t>>(j, "candidates");
  t.target_index = field<std::size_t>(j, "target_index");
  if (t.target_index >= t.candidates.size()) throw DataFormatError("triplet target_index out of range");
  return t;
}

}  // namespace concertcut::io
