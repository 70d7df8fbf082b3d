#pragma once

#include <string>
#include <vector>

#include "concertcut/io/records.hpp"

namespace concertcut::io {

struct EdlEntry {
  double time_s = 0.0;
  std::size_t cluster_id = 0;
  std::size_t candidate_frame = 0;

  bool operator==(const EdlEntry&) const = default;
};

struct EditDecisionList {
  std::string video_id;
  std::vector<EdlEntry> entries;

  void validate() const {
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (!(entries[i].time_s > entries[i - 1].time_s)) {
        throw ContractError("EDL '" + video_id + "': times not strictly increasing at entry " + std::to_string(i));
      }
    }
  }
};

inline json to_json(const EditDecisionList& edl) {
  json rows = json::array();
  for (const auto& e : edl.entries) {
    rows.push_back({{"time_s", e.time_s}, {"cluster_id", e.cluster_id}, {"candidate_frame", e.candidate_frame}});
  }
  return {{"video_id", edl.video_id}, {"entries", rows}};
}

inline EditDecisionList edl_from_json(const json& j) {
  EditDecisionList edl;
  edl.video_id = field<std::string>(j, "video_id");
  for (const auto& r : field<json>(j, "entries")) {
    edl.entries.push_back({field<double>(r, "time_s"), field<std::size_t>(r, "cluster_id"),
                           field<std::size_t>(r, "candidate_frame")});
  }
  try {
    edl.validate();
  } catch (const ContractError& e) {
    throw DataFormatError(e.what());
  }
  return edl;
}

}  // namespace concertcut::io
