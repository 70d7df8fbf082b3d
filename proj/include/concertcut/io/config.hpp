#pragma once

// Every tunable default, grouped by stage, with a JSON overlay. Unknown keys
// are rejected so typos do not silently fall back to defaults.

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "concertcut/cluster/clustering.hpp"
#include "concertcut/labeler/confirm.hpp"
#include "concertcut/selector/selector.hpp"
#include "concertcut/temporal/stream.hpp"
#include "concertcut/temporal/train.hpp"

namespace concertcut::io {

struct LabelerParams {
  double frame_diff_threshold = 25.0;
  double cosine_high = 0.95;
  double cosine_low = 0.8;
  double hsv_threshold = 0.5;
  std::size_t hsv_window = 2;
  double dedup_window_s = labeler::kDedupWindowS;
};

struct ClusterParams {
  double pca_min_variance = 0.66;
  cluster::SelectKConfig select_k;
  std::size_t min_clusters = 6;
  std::size_t distractors = 9;
};

struct Hyperparameters {
  LabelerParams labeler;
  ClusterParams cluster;
  temporal::TemporalModelConfig temporal_model;
  temporal::TemporalTrainConfig temporal_train;
  temporal::StreamConfig stream;
  selector::SelectorConfig selector;
  selector::SelectorTrainConfig selector_train;
};

namespace detail {

using FieldPtr = std::variant<double*, std::size_t*, bool*>;
using Section = std::vector<std::pair<const char*, FieldPtr>>;

inline std::vector<std::pair<const char*, Section>> sections(Hyperparameters& h) {
  auto& l = h.labeler;
  auto& c = h.cluster;
  auto& m = h.temporal_model;
  auto& t = h.temporal_train;
  auto& s = h.selector;
  auto& st = h.selector_train;
  return {
      {"labeler",
       {{"frame_diff_threshold", &l.frame_diff_threshold},
        {"cosine_high", &l.cosine_high},
        {"cosine_low", &l.cosine_low},
        {"hsv_threshold", &l.hsv_threshold},
        {"hsv_window", &l.hsv_window},
        {"dedup_window_s", &l.dedup_window_s}}},
      {"cluster",
       {{"pca_min_variance", &c.pca_min_variance},
        {"k_min", &c.select_k.k_min},
        {"k_max", &c.select_k.k_max},
        {"n_init", &c.select_k.kmeans.n_init},
        {"max_iter", &c.select_k.kmeans.max_iter},
        {"tol", &c.select_k.kmeans.tol},
        {"min_clusters", &c.min_clusters},
        {"distractors", &c.distractors}}},
      {"temporal_model",
       {{"n_mels", &m.n_mels},
        {"n_frames", &m.n_frames},
        {"audio_dim", &m.audio_dim},
        {"conv_blocks", &m.conv_blocks},
        {"conv_channels", &m.conv_channels},
        {"conv_kernel", &m.conv_kernel},
        {"conv_stride", &m.conv_stride},
        {"time_reduction", &m.time_reduction},
        {"transformer_layers", &m.transformer_layers},
        {"heads", &m.heads},
        {"ffn_mult", &m.ffn_mult},
        {"head_hidden", &m.head_hidden},
        {"multimodal", &m.multimodal},
        {"visual_dim", &m.visual_dim},
        {"standardize_input", &m.standardize_input}}},
      {"temporal_train",
       {{"epochs", &t.epochs},
        {"batch_size", &t.batch_size},
        {"lr", &t.lr},
        {"weight_decay", &t.weight_decay},
        {"warmup_epochs", &t.warmup_epochs},
        {"threshold", &t.threshold},
        {"balance", &t.balance},
        {"time_masks", &t.augment.time_masks},
        {"freq_masks", &t.augment.freq_masks},
        {"max_time_width", &t.augment.max_time_width},
        {"max_freq_width", &t.augment.max_freq_width},
        {"noise_ratio", &t.augment.noise_ratio}}},
      {"stream", {{"threshold", &h.stream.threshold}, {"refractory_s", &h.stream.refractory_s}}},
      {"selector", {{"input_dim", &s.input_dim}, {"proj_dim", &s.proj_dim}, {"candidates", &s.candidates}}},
      {"selector_train",
       {{"epochs", &st.epochs},
        {"batch_size", &st.batch_size},
        {"lr", &st.lr},
        {"cross_entropy", &st.cross_entropy},
        {"target_recall", &st.target_recall}}},
  };
}

inline void assign(FieldPtr p, const nlohmann::json& v, const std::string& where) {
  std::visit(
      [&](auto* dst) {
        using T = std::remove_pointer_t<decltype(dst)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
          *dst = v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::size_t>) {
          if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError(where + " must be a non-negative integer");
          }
          *dst = v.get<std::size_t>();
        } else {
          if (!v.is_number()) throw ConfigError(where + " must be a number");
          *dst = v.get<double>();
        }
      },
      p);
}

}  // namespace detail

inline void apply_overrides(Hyperparameters& h, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto secs = detail::sections(h);
  for (const auto& [name, body] : j.items()) {
    auto sec = std::find_if(secs.begin(), secs.end(), [&](const auto& s) { return name == s.first; });
    if (sec == secs.end()) throw ConfigError("unknown config section '" + name + "'");
    if (!body.is_object()) throw ConfigError("config section '" + name + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      auto f = std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& e) { return key == e.first; });
      if (f == sec->second.end()) throw ConfigError("unknown config key '" + name + "." + key + "'");
      detail::assign(f->second, value, name + "." + key);
    }
  }
}

inline nlohmann::json to_json(const Hyperparameters& h) {
  auto copy = h;
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, body] : detail::sections(copy)) {
    auto& sec = out[name];
    for (const auto& [key, ptr] : body) std::visit([&](auto* p) { sec[key] = *p; }, ptr);
  }
  return out;
}

// Section-level round trips used by checkpoint headers.
inline nlohmann::json section_json(const Hyperparameters& h, const std::string& name) {
  return to_json(h).at(name);
}

}  // namespace concertcut::io
