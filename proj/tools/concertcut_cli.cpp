#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "concertcut/audio/log_mel.hpp"
#include "concertcut/baselines/baselines.hpp"
#include "concertcut/core/parallel.hpp"
#include "concertcut/io/checkpoint.hpp"
#include "concertcut/io/config.hpp"
#include "concertcut/io/records.hpp"
#include "concertcut/io/split.hpp"
#include "concertcut/labeler/frames.hpp"
#include "concertcut/pipeline/edit.hpp"

namespace fs = std::filesystem;
using namespace concertcut;
using io::json;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::size_t threads = default_threads();
  std::string config_path;
  io::Hyperparameters hp;
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

cluster::Matrix load_embeddings(const fs::path& path) {
  const auto t = io::load_tensor(path);
  if (t.dims.size() != 2) throw DataFormatError(path.string() + ": embeddings must be a [frames, dim] tensor");
  cluster::Matrix m(t.dims[0], t.dims[1]);
  for (std::uint32_t r = 0; r < t.dims[0]; ++r) {
    for (std::uint32_t c = 0; c < t.dims[1]; ++c) m(r, c) = t.values[std::size_t{r} * t.dims[1] + c];
  }
  return m;
}

std::vector<std::vector<double>> matrix_rows(const cluster::Matrix& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(pipeline::embedding_row(m, static_cast<std::size_t>(r)));
  return out;
}

fs::path features_path(const fs::path& dir, const std::string& video_id) { return dir / (video_id + ".mel.ten"); }

template <class T, class F>
std::vector<T> read_records(const fs::path& path, F&& parse) {
  std::vector<T> out;
  for (const auto& j : io::read_jsonl(path)) out.push_back(parse(j));
  return out;
}

std::map<std::string, const io::ManifestEntry*> index_manifest(const std::vector<io::ManifestEntry>& m) {
  std::map<std::string, const io::ManifestEntry*> out;
  for (const auto& e : m) out[e.video_id] = &e;
  return out;
}

const io::ManifestEntry& lookup(const std::map<std::string, const io::ManifestEntry*>& idx, const std::string& id) {
  const auto it = idx.find(id);
  if (it == idx.end()) throw ContractError("video '" + id + "' is not in the manifest");
  return *it->second;
}

temporal::SceneStats stats_from_json(const json& j) {
  temporal::SceneStats s{io::field<double>(j, "mean_samples"), io::field<double>(j, "std_samples")};
  s.validate();
  return s;
}

json stats_to_json(const temporal::SceneStats& s) {
  return {{"mean_samples", s.mean_samples}, {"std_samples", s.std_samples}, {"mean_seconds", s.mean_seconds()}};
}

std::map<std::string, std::vector<double>> confirmed_cuts(const fs::path& path) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& c : read_records<labeler::CutEvent>(path, io::cut_from_json)) {
    if (c.confirmed) out[c.video_id].push_back(c.time_s);
  }
  for (auto& [id, v] : out) std::sort(v.begin(), v.end());
  return out;
}

// ---- features / labels ----

void features_extract(const Globals& g, const fs::path& manifest_path, const fs::path& out_dir) {
  const auto manifest = io::read_manifest(manifest_path);
  fs::create_directories(out_dir);
  std::vector<std::size_t> windows(manifest.size());
  parallel_for(manifest.size(), g.threads, [&](std::size_t i) {
    const auto& e = manifest[i];
    const auto clip = audio::read_wav(e.audio_path);
    const auto wins = audio::window_segments(clip, e.video_id);
    io::TensorData t;
    t.dims = {static_cast<std::uint32_t>(wins.size()), audio::MelConfig::kMels, audio::MelConfig::kFrames};
    t.values.reserve(t.numel());
    for (const auto& w : wins) {
      const auto s = audio::segment_log_mel(clip, w);
      for (double v : s.values) t.values.push_back(static_cast<float>(v));
    }
    io::save_tensor(features_path(out_dir, e.video_id), t);
    windows[i] = wins.size();
  });
  std::size_t total = 0;
  for (auto w : windows) total += w;
  std::printf("extracted %zu windows from %zu videos\n", total, manifest.size());
}

std::unique_ptr<labeler::CutOracle> make_oracle(const std::string& kind) {
  if (kind == "mock") return std::make_unique<labeler::MockOracle>();
  if (kind == "accept") return std::make_unique<labeler::ConstantOracle>(labeler::Verdict::is_cut);
  if (kind == "reject") return std::make_unique<labeler::ConstantOracle>(labeler::Verdict::not_cut);
  throw ConfigError("unknown oracle '" + kind + "' (mock, accept, reject)");
}

void labels_detect_cuts(const Globals& g, const fs::path& manifest_path, const fs::path& out,
                        const std::string& oracle_kind) {
  const auto manifest = io::read_manifest(manifest_path);
  const auto& p = g.hp.labeler;
  make_oracle(oracle_kind);
  std::vector<std::vector<json>> rows(manifest.size());
  parallel_for(manifest.size(), g.threads, [&](std::size_t i) {
    const auto& e = manifest[i];
    auto seq = labeler::load_frames(e.frames_path, e.video_id);
    auto candidates = labeler::frame_diff_detect(seq, p.frame_diff_threshold);
    if (seq.frames.size() >= 2 * p.hsv_window + 2) {
      auto hsv = labeler::adaptive_hsv_detect(seq, p.hsv_threshold, p.hsv_window);
      candidates.insert(candidates.end(), hsv.begin(), hsv.end());
    }
    if (!e.embeddings_path.empty()) {
      const auto emb = matrix_rows(load_embeddings(e.embeddings_path));
      if (emb.size() >= 2) {
        auto ev = labeler::embedding_events(e.video_id, seq.fps, labeler::cosine_boundary(emb, p.cosine_high, p.cosine_low));
        candidates.insert(candidates.end(), ev.begin(), ev.end());
      }
    }
    auto oracle = make_oracle(oracle_kind);
    const auto r = labeler::confirm_cuts(seq, candidates, *oracle, p.dedup_window_s);
    auto all = r.confirmed;
    all.insert(all.end(), r.unresolved.begin(), r.unresolved.end());
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.time_s < b.time_s; });
    for (const auto& c : all) rows[i].push_back(io::to_json(c));
  });
  std::vector<json> flat;
  for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  io::write_jsonl(out, flat);
  std::printf("wrote %zu cut events\n", flat.size());
}

void labels_segments(const fs::path& manifest_path, const fs::path& cuts_path, const fs::path& out,
                     const std::string& stats_path) {
  const auto manifest = io::read_manifest(manifest_path);
  const auto cuts = confirmed_cuts(cuts_path);
  temporal::SceneStats stats;
  if (!stats_path.empty()) {
    stats = stats_from_json(io::read_json(stats_path));
  } else {
    std::vector<std::vector<double>> all;
    for (const auto& [id, c] : cuts) all.push_back(c);
    stats = temporal::scene_stats_from_cuts(all);
  }
  std::vector<json> rows;
  std::size_t positives = 0;
  for (const auto& e : manifest) {
    const auto clip = audio::read_wav(e.audio_path);
    const auto it = cuts.find(e.video_id);
    const auto segs = temporal::label_segments(e.video_id, clip.duration_s(),
                                               it == cuts.end() ? std::vector<double>{} : it->second, stats);
    for (const auto& s : segs) {
      positives += s.label;
      rows.push_back(io::to_json(s));
    }
  }
  io::write_jsonl(out, rows);
  std::printf("wrote %zu segments (%zu with a cut)\n", rows.size(), positives);
}

// ---- clustering / triplets ----

void cluster_scenes(const Globals& g, const fs::path& manifest_path, const fs::path& out) {
  const auto manifest = io::read_manifest(manifest_path);
  std::vector<std::optional<cluster::ClusterAssignment>> res(manifest.size());
  parallel_for(manifest.size(), g.threads, [&](std::size_t i) {
    const auto& e = manifest[i];
    try {
      const auto pca = cluster::pca_reduce(load_embeddings(e.embeddings_path), g.hp.cluster.pca_min_variance);
      auto a = cluster::select_k(pca.reduced, derive_seed(g.seed, e.video_id), g.hp.cluster.select_k);
      a.video_id = e.video_id;
      res[i] = std::move(a);
    } catch (const DegenerateError& err) {
      warn("skipping " + e.video_id + ": " + err.what());
    }
  });
  std::vector<json> rows;
  std::vector<cluster::ClusterAssignment> kept;
  for (auto& r : res) {
    if (!r) continue;
    rows.push_back(io::to_json(*r));
    kept.push_back(*r);
  }
  io::write_jsonl(out, rows);
  std::printf("clustered %zu videos; %zu with at least %zu clusters\n", rows.size(),
              cluster::filter_videos(kept, g.hp.cluster.min_clusters).size(), g.hp.cluster.min_clusters);
}

void triplets_build(const Globals& g, const fs::path& clusters_path, const fs::path& out) {
  std::vector<json> rows;
  std::size_t skipped = 0, videos = 0;
  for (const auto& a : read_records<cluster::ClusterAssignment>(clusters_path, io::cluster_from_json)) {
    const auto r = cluster::build_triplets(a, g.hp.cluster.distractors, g.seed, g.hp.cluster.min_clusters);
    if (!r.triplets.empty()) ++videos;
    skipped += r.skipped;
    for (const auto& t : r.triplets) rows.push_back(io::to_json(t));
  }
  io::write_jsonl(out, rows);
  std::printf("wrote %zu triplets from %zu videos (%zu anchors skipped)\n", rows.size(), videos, skipped);
}

// ---- splits ----

void split_temporal_cmd(const Globals& g, const fs::path& manifest_path, const fs::path& segments_path,
                        const fs::path& cuts_path, const fs::path& out, const fs::path& stats_out) {
  const auto manifest = io::read_manifest(manifest_path);
  auto segments = read_records<temporal::SegmentRecord>(segments_path, io::segment_from_json);
  const auto split = io::split_temporal(manifest, segments, g.seed);
  const auto cuts = confirmed_cuts(cuts_path);
  std::vector<std::vector<double>> pool;
  for (const auto& [id, c] : cuts) {
    const auto it = split.videos.find(id);
    if (it != split.videos.end() && it->second != io::Split::test) pool.push_back(c);
  }
  const auto stats = temporal::scene_stats_from_cuts(pool);
  std::vector<std::string> ids;
  std::vector<json> rows;
  std::size_t counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    auto& s = segments[i];
    s.l_seg = temporal::time_label(s.alpha_seg, s.alpha_shot, stats);
    auto j = io::to_json(s);
    j["split"] = io::to_string(split.segments[i]);
    rows.push_back(std::move(j));
    ids.push_back(s.video_id);
    ++counts[static_cast<int>(split.segments[i])];
  }
  if (io::count_leaks(split.videos, ids, split.segments) != 0) throw ContractError("split_temporal leaked test videos");
  io::write_jsonl(out, rows);
  io::write_json(stats_out, stats_to_json(stats));
  std::printf("segments: %zu train, %zu val, %zu test\n", counts[0], counts[1], counts[2]);
}

void split_spatial_cmd(const Globals& g, const fs::path& manifest_path, const fs::path& triplets_path,
                       const fs::path& out, const std::string& manifest_out) {
  auto manifest = io::read_manifest(manifest_path);
  const auto videos = io::split_spatial(manifest, g.seed);
  std::vector<json> rows;
  std::vector<std::string> ids;
  std::vector<io::Split> assigned;
  for (const auto& t : read_records<cluster::TripletRecord>(triplets_path, io::triplet_from_json)) {
    const auto it = videos.find(t.video_id);
    if (it == videos.end()) throw ContractError("triplet of unknown video '" + t.video_id + "'");
    auto j = io::to_json(t);
    j["split"] = io::to_string(it->second);
    rows.push_back(std::move(j));
    ids.push_back(t.video_id);
    assigned.push_back(it->second);
  }
  if (io::count_leaks(videos, ids, assigned, true) != 0) throw ContractError("split_spatial leaked test videos");
  io::write_jsonl(out, rows);
  if (!manifest_out.empty()) {
    std::vector<json> m;
    for (auto& e : manifest) {
      e.split = videos.at(e.video_id);
      m.push_back(io::to_json(e));
    }
    io::write_jsonl(manifest_out, m);
  }
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& [id, s] : videos) ++counts[static_cast<int>(s)];
  std::printf("videos: %zu train, %zu val, %zu test; %zu triplets\n", counts[0], counts[1], counts[2], rows.size());
}

// ---- temporal training / evaluation ----

struct SplitSegment {
  temporal::SegmentRecord record;
  io::Split split;
};

std::vector<SplitSegment> read_split_segments(const fs::path& path) {
  std::vector<SplitSegment> out;
  for (const auto& j : io::read_jsonl(path)) {
    out.push_back({io::segment_from_json(j), io::split_from_string(io::field<std::string>(j, "split"))});
  }
  return out;
}

// Builds examples for the requested splits; features come from the per-video
// log-mel tensors written by `features extract`.
std::map<io::Split, std::vector<temporal::TemporalExample>> temporal_examples(
    const std::vector<SplitSegment>& segs, const fs::path& features_dir, const temporal::TemporalModelConfig& mc,
    const std::map<std::string, const io::ManifestEntry*>& manifest) {
  std::map<std::string, io::TensorData> feats;
  std::map<std::string, cluster::Matrix> embs;
  std::map<io::Split, std::vector<temporal::TemporalExample>> out;
  const std::size_t per = mc.n_mels * mc.n_frames;
  for (const auto& s : segs) {
    auto it = feats.find(s.record.video_id);
    if (it == feats.end()) {
      it = feats.emplace(s.record.video_id, io::load_tensor(features_path(features_dir, s.record.video_id))).first;
      if (it->second.dims.size() != 3 || it->second.dims[1] != mc.n_mels || it->second.dims[2] != mc.n_frames) {
        throw DataFormatError("features for '" + s.record.video_id + "' have the wrong shape");
      }
    }
    const auto w = static_cast<std::size_t>(std::llround(s.record.start_s / audio::kHopSeconds));
    if (w >= it->second.dims[0]) throw DataFormatError("segment beyond the extracted windows of " + s.record.video_id);
    temporal::TemporalExample ex;
    ex.features.assign(it->second.values.begin() + static_cast<std::ptrdiff_t>(w * per),
                       it->second.values.begin() + static_cast<std::ptrdiff_t>((w + 1) * per));
    ex.l_seg = s.record.l_seg;
    ex.label = s.record.label;
    if (mc.multimodal) {
      const auto& entry = lookup(manifest, s.record.video_id);
      auto e = embs.find(entry.video_id);
      if (e == embs.end()) e = embs.emplace(entry.video_id, load_embeddings(entry.embeddings_path)).first;
      const auto f = pipeline::frame_at(s.record.start_s + audio::kSegmentSeconds / 2, entry.fps,
                                        static_cast<std::size_t>(e->second.rows()));
      const auto row = pipeline::embedding_row(e->second, f);
      ex.visual.assign(row.begin(), row.end());
    }
    out[s.split].push_back(std::move(ex));
  }
  return out;
}

io::Hyperparameters hp_from_header(const Globals& g, const json& header, const char* section) {
  auto hp = g.hp;
  io::apply_overrides(hp, {{section, io::field<json>(header, section)}});
  return hp;
}

void train_temporal_cmd(Globals& g, const fs::path& manifest_path, const fs::path& segments_path,
                        const fs::path& features_dir, const fs::path& stats_path, const fs::path& out,
                        const std::string& log_path) {
  const auto manifest = io::read_manifest(manifest_path);
  const auto idx = index_manifest(manifest);
  const auto stats = stats_from_json(io::read_json(stats_path));
  auto& mc = g.hp.temporal_model;
  if (mc.multimodal) {
    for (const auto& e : manifest) {
      if (!e.embeddings_path.empty()) {
        mc.visual_dim = io::load_tensor(e.embeddings_path).dims.at(1);
        break;
      }
    }
  }
  auto sets = temporal_examples(read_split_segments(segments_path), features_dir, mc, idx);
  temporal::TemporalModel model(mc, derive_seed(g.seed, "temporal-init"));
  const auto r = temporal::train_temporal(model, sets[io::Split::train], sets[io::Split::val], g.hp.temporal_train,
                                          g.seed, [](const temporal::EpochLog& e) {
                                            std::fprintf(stderr, "epoch %zu loss %.4f val_f1 %.2f\n", e.epoch,
                                                         e.train_loss, e.val_f1);
                                          });
  json header = {{"kind", "temporal"},
                 {"temporal_model", io::section_json(g.hp, "temporal_model")},
                 {"stats", stats_to_json(stats)},
                 {"best_epoch", r.best_epoch},
                 {"best_val_f1", r.best_val_f1}};
  io::save_checkpoint(out, io::make_checkpoint(header, model.params()));
  if (!log_path.empty()) {
    io::write_atomically(log_path, [&](std::ostream& os) { os << temporal::training_log_csv(r.history); });
  }
  std::printf("best epoch %zu, validation F1 %.2f%%\n", r.best_epoch, r.best_val_f1);
}

std::pair<temporal::TemporalModel, temporal::SceneStats> load_temporal(const Globals& g, const fs::path& path) {
  const auto ckpt = io::load_checkpoint(path);
  if (io::field_or<std::string>(ckpt.header, "kind", "") != "temporal") {
    throw DataFormatError(path.string() + " is not a temporal checkpoint");
  }
  const auto hp = hp_from_header(g, ckpt.header, "temporal_model");
  temporal::TemporalModel model(hp.temporal_model, 0);
  io::load_parameters(ckpt, model.params());
  return {std::move(model), stats_from_json(io::field<json>(ckpt.header, "stats"))};
}

void write_roc_csv(const fs::path& path, const eval::RocCurve& roc) {
  io::write_atomically(path, [&](std::ostream& os) {
    os << "threshold,fpr,tpr\n";
    char buf[128];
    for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
      if (std::isinf(roc.thresholds[i])) {
        std::snprintf(buf, sizeof buf, "inf,%.10g,%.10g\n", roc.fpr[i], roc.tpr[i]);
      } else {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", roc.thresholds[i], roc.fpr[i], roc.tpr[i]);
      }
      os << buf;
    }
  });
}

// Metrics for binary decisions plus the ROC of the continuous scores.
json binary_report(const std::vector<double>& scores, const std::vector<int>& decisions, const std::vector<int>& labels,
                   const std::string& roc_path) {
  std::vector<double> d(decisions.begin(), decisions.end());
  const auto rep = eval::precision_recall_f1_accuracy(eval::confusion(d, labels, 0.5));
  json j = {{"precision", rep.precision}, {"recall", rep.recall}, {"f1", rep.f1},
            {"accuracy", rep.accuracy},   {"n", labels.size()},     {"auc", nullptr}};
  std::size_t pos = 0;
  for (int l : labels) pos += l;
  j["n_positive"] = pos;
  if (pos > 0 && pos < labels.size()) {
    const auto roc = eval::roc_auc(scores, labels);
    j["auc"] = roc.auc;
    if (!roc_path.empty()) write_roc_csv(roc_path, roc);
  } else {
    warn("only one class present; AUC undefined");
  }
  std::printf("precision %.2f%% recall %.2f%% f1 %.2f%% accuracy %.2f%%", rep.precision, rep.recall, rep.f1,
              rep.accuracy);
  if (j["auc"].is_number()) std::printf(" auc %.4f", j["auc"].get<double>());
  std::printf(" (n=%zu)\n", labels.size());
  return j;
}

void eval_temporal_cmd(const Globals& g, const fs::path& ckpt_path, const std::string& manifest_path,
                       const fs::path& segments_path, const fs::path& features_dir, const std::string& split,
                       const fs::path& out, const std::string& roc_path) {
  auto [model, stats] = load_temporal(g, ckpt_path);
  std::vector<io::ManifestEntry> manifest;
  if (!manifest_path.empty()) manifest = io::read_manifest(manifest_path);
  if (model.config().multimodal && manifest.empty()) throw ContractError("multimodal evaluation needs --manifest");
  const auto want = io::split_from_string(split);
  std::vector<SplitSegment> segs;
  for (auto& s : read_split_segments(segments_path)) {
    if (s.split == want) segs.push_back(std::move(s));
  }
  if (segs.empty()) throw ContractError("no segments in split '" + split + "'");
  auto sets = temporal_examples(segs, features_dir, model.config(), index_manifest(manifest));
  const auto scored = temporal::score_examples(model, sets[want]);
  std::vector<int> decisions;
  for (double s : scored.scores) decisions.push_back(s >= g.hp.temporal_train.threshold);
  auto j = binary_report(scored.scores, decisions, scored.labels, roc_path);
  j["model"] = "temporal";
  j["split"] = split;
  io::write_json(out, j);
}

void baseline_cmd(const Globals& g, const std::string& kind, const fs::path& segments_path, const fs::path& stats_path,
                  const std::string& split, const fs::path& out, const std::string& roc_path) {
  const auto stats = stats_from_json(io::read_json(stats_path));
  const auto want = io::split_from_string(split);
  std::vector<double> scores;
  std::vector<int> decisions, labels;
  const auto poisson = baselines::PoissonBaseline::from_stats(stats);
  const auto expo = baselines::ExponentialBaseline::from_stats(stats);
  std::size_t i = 0;
  for (const auto& s : read_split_segments(segments_path)) {
    if (s.split != want) continue;
    const auto draw_seed = derive_seed(g.seed, s.record.video_id, ++i);
    if (kind == "poisson") {
      scores.push_back(baselines::poisson_score(poisson.lambda()));
      decisions.push_back(baselines::poisson_classify(poisson, draw_seed));
    } else {
      const double t = baselines::elapsed_scene_seconds(s.record);
      scores.push_back(baselines::exponential_score(expo, t));
      decisions.push_back(baselines::exponential_classify(expo, t, draw_seed));
    }
    labels.push_back(s.record.label);
  }
  if (labels.empty()) throw ContractError("no segments in split '" + split + "'");
  auto j = binary_report(scores, decisions, labels, roc_path);
  j["model"] = kind;
  j["split"] = split;
  io::write_json(out, j);
}

// ---- selector ----

struct SplitTriplet {
  cluster::TripletRecord record;
  io::Split split;
};

std::vector<selector::SelectorExample> selector_examples(const std::vector<SplitTriplet>& triplets, io::Split want,
                                                         const std::map<std::string, const io::ManifestEntry*>& idx,
                                                         std::size_t& dim) {
  std::map<std::string, cluster::Matrix> embs;
  std::vector<selector::SelectorExample> out;
  for (const auto& t : triplets) {
    if (t.split != want) continue;
    auto it = embs.find(t.record.video_id);
    if (it == embs.end()) {
      it = embs.emplace(t.record.video_id, load_embeddings(lookup(idx, t.record.video_id).embeddings_path)).first;
    }
    const auto& m = it->second;
    if (dim == 0) dim = static_cast<std::size_t>(m.cols());
    if (static_cast<std::size_t>(m.cols()) != dim) throw DataFormatError("embedding dimensions differ across videos");
    auto row = [&](std::size_t f) {
      if (f >= static_cast<std::size_t>(m.rows())) throw DataFormatError("triplet frame beyond the embeddings");
      return pipeline::embedding_row(m, f);
    };
    selector::SelectorExample ex;
    ex.anchor = row(t.record.anchor_frame);
    for (auto f : t.record.candidates) {
      const auto r = row(f);
      ex.candidates.insert(ex.candidates.end(), r.begin(), r.end());
    }
    ex.target = t.record.target_index;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<SplitTriplet> read_split_triplets(const fs::path& path) {
  std::vector<SplitTriplet> out;
  for (const auto& j : io::read_jsonl(path)) {
    out.push_back({io::triplet_from_json(j), io::split_from_string(io::field<std::string>(j, "split"))});
  }
  return out;
}

void train_selector_cmd(Globals& g, const fs::path& manifest_path, const fs::path& triplets_path,
                        const fs::path& out, const std::string& log_path) {
  const auto manifest = io::read_manifest(manifest_path);
  const auto idx = index_manifest(manifest);
  const auto triplets = read_split_triplets(triplets_path);
  std::size_t dim = 0;
  const auto train = selector_examples(triplets, io::Split::train, idx, dim);
  const auto val = selector_examples(triplets, io::Split::val, idx, dim);
  if (dim != 0) g.hp.selector.input_dim = dim;
  if (!triplets.empty()) g.hp.selector.candidates = triplets.front().record.candidates.size();
  selector::MatchingModule m(g.hp.selector, derive_seed(g.seed, "selector-init"));
  const auto r = selector::train_selector(m, train, val, g.hp.selector_train, g.seed);
  json header = {{"kind", "selector"},
                 {"selector", io::section_json(g.hp, "selector")},
                 {"best_epoch", r.best_epoch},
                 {"best_recall_at_1", r.best_recall_at_1}};
  io::save_checkpoint(out, io::make_checkpoint(header, m.params()));
  if (!log_path.empty()) {
    io::write_atomically(log_path, [&](std::ostream& os) {
      os << "epoch,train_loss,val_recall_at_1,val_recall_at_3\n";
      char buf[160];
      for (const auto& e : r.history) {
        std::snprintf(buf, sizeof buf, "%zu,%.8g,%.4f,%.4f\n", e.epoch, e.train_loss, e.val_recall_at_1,
                      e.val_recall_at_3);
        os << buf;
      }
    });
  }
  std::printf("best epoch %zu, validation Recall@1 %.2f%%\n", r.best_epoch, r.best_recall_at_1);
}

selector::MatchingModule load_selector(const Globals& g, const fs::path& path) {
  const auto ckpt = io::load_checkpoint(path);
  if (io::field_or<std::string>(ckpt.header, "kind", "") != "selector") {
    throw DataFormatError(path.string() + " is not a selector checkpoint");
  }
  const auto hp = hp_from_header(g, ckpt.header, "selector");
  selector::MatchingModule m(hp.selector, 0);
  io::load_parameters(ckpt, m.params());
  return m;
}

void eval_selector_cmd(const Globals& g, const fs::path& ckpt_path, const fs::path& manifest_path,
                       const fs::path& triplets_path, const std::string& split, const fs::path& out) {
  const auto m = load_selector(g, ckpt_path);
  const auto manifest = io::read_manifest(manifest_path);
  std::size_t dim = m.config().input_dim;
  const auto set = selector_examples(read_split_triplets(triplets_path), io::split_from_string(split),
                                     index_manifest(manifest), dim);
  if (set.empty()) throw ContractError("no triplets in split '" + split + "'");
  const auto scores = selector::score_examples(m, set);
  const auto targets = selector::targets_of(set);
  const json j = {{"recall_at_1", eval::recall_at_k(scores, targets, 1)},
                  {"recall_at_3", eval::recall_at_k(scores, targets, std::min<std::size_t>(3, m.config().candidates))},
                  {"n_queries", set.size()}};
  io::write_json(out, j);
  std::printf("Recall@1 %.2f%% Recall@3 %.2f%% (n=%zu)\n", j["recall_at_1"].get<double>(),
              j["recall_at_3"].get<double>(), set.size());
}

// ---- edit ----

void edit_run_cmd(const Globals& g, const fs::path& manifest_path, const fs::path& temporal_path,
                  const fs::path& selector_path, const fs::path& clusters_path, const std::string& split,
                  const fs::path& out) {
  const auto manifest = io::read_manifest(manifest_path);
  const auto [model, stats] = load_temporal(g, temporal_path);
  const auto sel = load_selector(g, selector_path);
  std::map<std::string, cluster::ClusterAssignment> clusters;
  for (auto& a : read_records<cluster::ClusterAssignment>(clusters_path, io::cluster_from_json)) {
    clusters[a.video_id] = std::move(a);
  }
  pipeline::EditConfig cfg{g.hp.stream};
  std::vector<json> rows;
  for (const auto& e : manifest) {
    if (!split.empty() && e.split != io::split_from_string(split)) continue;
    const auto c = clusters.find(e.video_id);
    if (c == clusters.end()) {
      warn("skipping " + e.video_id + ": no cluster assignment");
      continue;
    }
    const auto emb = load_embeddings(e.embeddings_path);
    const pipeline::EditInputs in{e.video_id, &emb, &c->second, e.fps};
    const auto edl = pipeline::edit_run(audio::read_wav(e.audio_path), in, model, stats, sel, cfg, g.seed, warn);
    if (edl) rows.push_back(io::to_json(*edl));
  }
  io::write_jsonl(out, rows);
  std::printf("wrote %zu edit decision lists\n", rows.size());
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  CLI::App app{"Concert video cut timing and shot selection"};
  app.fallthrough();
  app.add_option("--seed", g.seed, "Global random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for per-video commands")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config_path, "JSON file overriding hyperparameter defaults");
  bool dump_config = false;
  app.add_flag("--print-config", dump_config, "Print the effective hyperparameters and exit");
  app.require_subcommand(0, 1);

  std::string manifest, out, cuts, segments, stats, features, clusters, triplets, log, roc, ckpt, sel_ckpt,
      manifest_out, oracle = "mock", split = "test", stats_out, edit_split;
  std::function<void()> run;

  auto group = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->require_subcommand(1);
    s->fallthrough();
    return s;
  };
  auto cmd = [&](CLI::App* parent, const char* name, const char* help, std::function<void()> fn) {
    auto* s = parent->add_subcommand(name, help);
    s->fallthrough();
    s->callback([&run, fn] { run = fn; });
    return s;
  };

  auto* features_g = group("features", "Audio feature extraction");
  auto* fx = cmd(features_g, "extract", "Log-mel spectrograms for every 4 s window",
                 [&] { features_extract(g, manifest, out); });
  fx->add_option("--manifest", manifest)->required();
  fx->add_option("--out", out, "Output directory")->required();

  auto* labels_g = group("labels", "Cut labels");
  auto* dc = cmd(labels_g, "detect-cuts", "Detect and confirm cuts from frames",
                 [&] { labels_detect_cuts(g, manifest, out, oracle); });
  dc->add_option("--manifest", manifest)->required();
  dc->add_option("--out", out)->required();
  dc->add_option("--oracle", oracle, "mock, accept or reject")->capture_default_str();
  auto* ls = cmd(labels_g, "segments", "Label 4 s windows from confirmed cuts",
                 [&] { labels_segments(manifest, cuts, out, stats); });
  ls->add_option("--manifest", manifest)->required();
  ls->add_option("--cuts", cuts)->required();
  ls->add_option("--out", out)->required();
  ls->add_option("--stats", stats, "Scene statistics JSON (default: computed from the cuts)");

  auto* cluster_g = group("cluster", "Pseudo-shot discovery");
  auto* cs = cmd(cluster_g, "scenes", "PCA and K-Means over frame embeddings", [&] { cluster_scenes(g, manifest, out); });
  cs->add_option("--manifest", manifest)->required();
  cs->add_option("--out", out)->required();

  auto* triplets_g = group("triplets", "Selector training data");
  auto* tb = cmd(triplets_g, "build", "Anchor/positive/distractor triplets", [&] { triplets_build(g, clusters, out); });
  tb->add_option("--clusters", clusters)->required();
  tb->add_option("--out", out)->required();

  auto* split_g = group("split", "Dataset splits");
  auto* st = cmd(split_g, "temporal", "Test videos, then stratified train/val segments",
                 [&] { split_temporal_cmd(g, manifest, segments, cuts, out, stats_out); });
  st->add_option("--manifest", manifest)->required();
  st->add_option("--segments", segments)->required();
  st->add_option("--cuts", cuts)->required();
  st->add_option("--out", out)->required();
  st->add_option("--stats-out", stats_out)->required();
  auto* ss = cmd(split_g, "spatial", "Train/val/test by video",
                 [&] { split_spatial_cmd(g, manifest, triplets, out, manifest_out); });
  ss->add_option("--manifest", manifest)->required();
  ss->add_option("--triplets", triplets)->required();
  ss->add_option("--out", out)->required();
  ss->add_option("--manifest-out", manifest_out);

  auto* train_g = group("train", "Model training");
  auto* tt = cmd(train_g, "temporal", "Train the cut-timing model",
                 [&] { train_temporal_cmd(g, manifest, segments, features, stats, out, log); });
  tt->add_option("--manifest", manifest)->required();
  tt->add_option("--segments", segments)->required();
  tt->add_option("--features", features)->required();
  tt->add_option("--stats", stats)->required();
  tt->add_option("--out", out)->required();
  tt->add_option("--log", log, "Training log CSV");
  auto* ts = cmd(train_g, "selector", "Train the shot-matching module",
                 [&] { train_selector_cmd(g, manifest, triplets, out, log); });
  ts->add_option("--manifest", manifest)->required();
  ts->add_option("--triplets", triplets)->required();
  ts->add_option("--out", out)->required();
  ts->add_option("--log", log, "Training log CSV");

  auto* base_g = group("baseline", "Statistical baselines");
  for (const char* kind : {"poisson", "exponential"}) {
    const std::string k = kind;
    auto* b = cmd(base_g, kind, "Evaluate a baseline on a segment split",
                  [&, k] { baseline_cmd(g, k, segments, stats, split, out, roc); });
    b->add_option("--segments", segments)->required();
    b->add_option("--stats", stats)->required();
    b->add_option("--split", split)->capture_default_str();
    b->add_option("--out", out)->required();
    b->add_option("--roc", roc, "ROC points CSV");
  }

  auto* eval_g = group("eval", "Model evaluation");
  auto* et = cmd(eval_g, "temporal", "Classification metrics and ROC-AUC",
                 [&] { eval_temporal_cmd(g, ckpt, manifest, segments, features, split, out, roc); });
  et->add_option("--checkpoint", ckpt)->required();
  et->add_option("--manifest", manifest, "Needed for multimodal models");
  et->add_option("--segments", segments)->required();
  et->add_option("--features", features)->required();
  et->add_option("--split", split)->capture_default_str();
  et->add_option("--out", out)->required();
  et->add_option("--roc", roc, "ROC points CSV");
  auto* es = cmd(eval_g, "selector", "Recall@1 and Recall@3",
                 [&] { eval_selector_cmd(g, ckpt, manifest, triplets, split, out); });
  es->add_option("--checkpoint", ckpt)->required();
  es->add_option("--manifest", manifest)->required();
  es->add_option("--triplets", triplets)->required();
  es->add_option("--split", split)->capture_default_str();
  es->add_option("--out", out)->required();

  auto* edit_g = group("edit", "Automatic editing");
  auto* er = cmd(edit_g, "run", "When to cut and which shot to cut to",
                 [&] { edit_run_cmd(g, manifest, ckpt, sel_ckpt, clusters, edit_split, out); });
  er->add_option("--manifest", manifest)->required();
  er->add_option("--temporal", ckpt)->required();
  er->add_option("--selector", sel_ckpt)->required();
  er->add_option("--clusters", clusters)->required();
  er->add_option("--threshold", g.hp.stream.threshold, "Cut probability threshold");
  er->add_option("--split", edit_split, "Only edit videos of this manifest split");
  er->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!g.config_path.empty()) {
      const double threshold = g.hp.stream.threshold;
      io::apply_overrides(g.hp, io::read_json(g.config_path));
      if (er->parsed() && er->count("--threshold") > 0) g.hp.stream.threshold = threshold;
    }
    if (dump_config) {
      std::cout << io::to_json(g.hp).dump(2) << '\n';
      return 0;
    }
    if (!run) {
      std::cerr << app.help();
      return 2;
    }
    run();
  } catch (const DataFormatError& e) {
    std::cerr << "data format error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data format error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
