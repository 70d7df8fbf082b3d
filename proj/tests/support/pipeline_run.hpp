#pragma once

// Drives the command-line tool through the whole pipeline on a corpus
// written by write_corpus.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace concertcut::testing {

struct CommandResult {
  std::string command;
  int status = -1;
  std::string output;
};

inline CommandResult run(const std::string& command) {
  CommandResult r;
  r.command = command;
  FILE* p = popen((command + " 2>&1").c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Small models and few epochs so the full pipeline runs in seconds.
inline void write_tiny_config(const std::filesystem::path& path) {
  std::ofstream(path) << R"({
  "temporal_model": {"conv_blocks": 1, "conv_channels": 2, "time_reduction": 16, "audio_dim": 8,
                     "transformer_layers": 1, "heads": 2, "ffn_mult": 2, "head_hidden": 8,
                     "standardize_input": true},
  "temporal_train": {"epochs": 2, "batch_size": 8, "warmup_epochs": 1, "lr": 0.003},
  "selector": {"proj_dim": 8},
  "selector_train": {"epochs": 3, "lr": 0.001},
  "cluster": {"min_clusters": 3}
})";
}

struct PipelineRun {
  std::filesystem::path dir;
  std::vector<CommandResult> steps;
  std::vector<std::string> outputs;  // payload files, relative to dir

  PipelineRun(const std::string& cli, const std::filesystem::path& corpus, const std::filesystem::path& config,
              const std::filesystem::path& out_dir, std::uint64_t seed)
      : dir(out_dir) {
    std::filesystem::create_directories(dir);
    const std::string m = (corpus / "manifest.jsonl").string();
    const std::string base = cli + " --seed " + std::to_string(seed) + " --config " + config.string() + " ";
    auto o = [&](const std::string& name) {
      outputs.push_back(name);
      return (dir / name).string();
    };
    auto d = [&](const std::string& name) { return (dir / name).string(); };
    auto step = [&](const std::string& args) { steps.push_back(run(base + args)); };

    step("features extract --manifest " + m + " --out " + d("features"));
    step("labels detect-cuts --manifest " + m + " --out " + o("cuts.jsonl"));
    step("labels segments --manifest " + m + " --cuts " + d("cuts.jsonl") + " --out " + o("segments.jsonl"));
    step("split temporal --manifest " + m + " --segments " + d("segments.jsonl") + " --cuts " + d("cuts.jsonl") +
         " --out " + o("segments_split.jsonl") + " --stats-out " + o("stats.json"));
    step("cluster scenes --manifest " + m + " --out " + o("clusters.jsonl"));
    step("triplets build --clusters " + d("clusters.jsonl") + " --out " + o("triplets.jsonl"));
    step("split spatial --manifest " + m + " --triplets " + d("triplets.jsonl") + " --out " +
         o("triplets_split.jsonl") + " --manifest-out " + o("manifest_split.jsonl"));
    step("train temporal --manifest " + m + " --segments " + d("segments_split.jsonl") + " --features " +
         d("features") + " --stats " + d("stats.json") + " --out " + o("temporal.ckpt") + " --log " +
         o("temporal_log.csv"));
    step("train selector --manifest " + m + " --triplets " + d("triplets_split.jsonl") + " --out " +
         o("selector.ckpt") + " --log " + o("selector_log.csv"));
    step("eval temporal --checkpoint " + d("temporal.ckpt") + " --segments " + d("segments_split.jsonl") +
         " --features " + d("features") + " --out " + o("temporal_eval.json") + " --roc " + o("temporal_roc.csv"));
    step("baseline poisson --segments " + d("segments_split.jsonl") + " --stats " + d("stats.json") + " --out " +
         o("poisson.json") + " --roc " + o("poisson_roc.csv"));
    step("baseline exponential --segments " + d("segments_split.jsonl") + " --stats " + d("stats.json") +
         " --out " + o("exponential.json") + " --roc " + o("exponential_roc.csv"));
    step("eval selector --checkpoint " + d("selector.ckpt") + " --manifest " + m + " --triplets " +
         d("triplets_split.jsonl") + " --out " + o("selector_eval.json"));
    step("edit run --manifest " + d("manifest_split.jsonl") + " --temporal " + d("temporal.ckpt") +
         " --selector " + d("selector.ckpt") + " --clusters " + d("clusters.jsonl") + " --split test --out " +
         o("edl.jsonl"));
    if (std::filesystem::is_directory(dir / "features")) {
      for (const auto& f : std::filesystem::directory_iterator(dir / "features")) {
        outputs.push_back("features/" + f.path().filename().string());
      }
    }
    std::sort(outputs.begin(), outputs.end());
  }

  bool ok() const {
    for (const auto& s : steps) {
      if (s.status != 0) return false;
    }
    return true;
  }
};

}  // namespace concertcut::testing
