#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "concertcut/audio/log_mel.hpp"
#include "concertcut/tensor/nn.hpp"

namespace concertcut::temporal {

struct TemporalModelConfig {
  std::size_t n_mels = 128;
  std::size_t n_frames = 400;
  std::size_t audio_dim = 256;
  std::size_t conv_blocks = 3;
  std::size_t conv_channels = 16;  // first block; doubles per block
  std::size_t conv_kernel = 5;
  std::size_t conv_stride = 2;
  std::size_t time_reduction = 2;  // frame count divided by this per block
  std::size_t transformer_layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t head_hidden = 256;
  bool multimodal = false;
  std::size_t visual_dim = 512;
  bool standardize_input = false;

  std::size_t time_dim() const { return audio_dim / 2; }

  std::size_t channels(std::size_t block) const { return conv_channels << block; }

  // Frequency length after each block and frame count after each block.
  std::vector<std::size_t> freq_lengths() const {
    std::vector<std::size_t> f{n_mels};
    for (std::size_t b = 0; b < conv_blocks; ++b) {
      if (f.back() < conv_kernel) {
        throw ConfigError("temporal model: frequency axis shrinks below the kernel at block " +
                          std::to_string(b));
      }
      f.push_back((f.back() - conv_kernel) / conv_stride + 1);
    }
    return f;
  }
  std::vector<std::size_t> frame_counts() const {
    std::vector<std::size_t> t{n_frames};
    for (std::size_t b = 0; b < conv_blocks; ++b) {
      const std::size_t next = t.back() / time_reduction;
      if (next == 0) throw ConfigError("temporal model: time axis reduced to zero frames");
      t.push_back(next);
    }
    return t;
  }

  void validate() const {
    if (audio_dim == 0 || audio_dim % 2 != 0) throw ConfigError("audio_dim must be even and positive");
    if (heads == 0 || audio_dim % heads != 0) throw ConfigError("audio_dim must be divisible by heads");
    if (conv_blocks == 0) throw ConfigError("conv_blocks must be >= 1");
    if (conv_channels == 0 || conv_kernel == 0 || conv_stride == 0) {
      throw ConfigError("conv channels, kernel and stride must be positive");
    }
    if (time_reduction == 0) throw ConfigError("time_reduction must be positive");
    if (ffn_mult == 0 || head_hidden == 0) throw ConfigError("ffn_mult and head_hidden must be positive");
    if (multimodal && visual_dim == 0) throw ConfigError("visual_dim must be positive");
    freq_lengths();
    frame_counts();
  }
};

struct ConvBlock {
  Tensor kernels;    // [C_out, C_in, K]
  Tensor conv_bias;  // [C_out]
  Tensor time_w;     // [T_out, T_in]
  LayerNormParams norm;
  Tensor glu_w, glu_v;  // [C_out, C_out]
};

// Embeddings just before fusion, each L2-normalized.
struct TemporalForward {
  Tensor probability;  // [1]
  Tensor f_audio;
  Tensor f_scene;
  Tensor f_visual;  // undefined when unimodal
};

class TemporalModel {
 public:
  TemporalModel(TemporalModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const auto freqs = cfg_.freq_lengths();
    const auto frames = cfg_.frame_counts();
    std::size_t c_in = 1;
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b) {
      const std::string name = "conv" + std::to_string(b);
      const std::size_t c = cfg_.channels(b);
      ConvBlock blk;
      blk.kernels = params_.add(name + ".kernels",
                                init_uniform({c, c_in, cfg_.conv_kernel}, c_in * cfg_.conv_kernel, rng));
      blk.conv_bias = params_.add(name + ".bias", init_uniform({c}, c_in * cfg_.conv_kernel, rng));
      blk.time_w = params_.add(name + ".time", init_uniform({frames[b + 1], frames[b]}, frames[b], rng));
      blk.norm = LayerNormParams::make(params_, name + ".norm", c * freqs[b + 1]);
      blk.glu_w = params_.add(name + ".glu.w", init_uniform({c, c}, c, rng));
      blk.glu_v = params_.add(name + ".glu.v", init_uniform({c, c}, c, rng));
      blocks_.push_back(std::move(blk));
      c_in = c;
    }
    const std::size_t feat = c_in * freqs.back();
    const std::size_t d = cfg_.audio_dim, td = cfg_.time_dim();
    in_proj_ = LinearParams::make(params_, "in_proj", feat, d, rng);
    pe_ = sinusoidal_pe(frames.back(), d);
    for (std::size_t l = 0; l < cfg_.transformer_layers; ++l) {
      layers_.push_back(TransformerLayer::make(params_, "encoder" + std::to_string(l), d, cfg_.heads,
                                               cfg_.ffn_mult, rng));
    }
    audio_fc1_ = LinearParams::make(params_, "audio_head.fc1", frames.back() * d, d, rng);
    audio_fc2_ = LinearParams::make(params_, "audio_head.fc2", d, d, rng);
    scene_fc1_ = LinearParams::make(params_, "scene.fc1", 1, td, rng);
    scene_fc2_ = LinearParams::make(params_, "scene.fc2", td, td, rng);
    e_scene_ = params_.add("scene.e_scene", init_uniform({td}, td, rng));
    std::size_t fused = d + td;
    if (cfg_.multimodal) {
      visual_proj_ = LinearParams::make(params_, "visual_proj", cfg_.visual_dim, d, rng);
      fused += d;
    }
    head_fc1_ = LinearParams::make(params_, "head.fc1", fused, cfg_.head_hidden, rng);
    head_fc2_ = LinearParams::make(params_, "head.fc2", cfg_.head_hidden, 1, rng);
  }

  // Tensors share storage with the parameter set, so copies would alias.
  TemporalModel(const TemporalModel&) = delete;
  TemporalModel& operator=(const TemporalModel&) = delete;
  TemporalModel(TemporalModel&&) = default;
  TemporalModel& operator=(TemporalModel&&) = default;

  const TemporalModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Makes the final projection output 0 so the model predicts exactly 0.5.
  void zero_final_layer() { head_fc2_.zero_fill(); }

  // Spectrogram values are [mel][frame]; the network consumes [frame][1][mel].
  Tensor input_tensor(std::span<const double> mel_major) const {
    const std::size_t f = cfg_.n_mels, t = cfg_.n_frames;
    if (mel_major.size() != f * t) {
      throw DimensionError("temporal model expects " + std::to_string(f) + "x" + std::to_string(t) +
                           " input, got " + std::to_string(mel_major.size()) + " values");
    }
    std::vector<double> v(f * t);
    for (std::size_t m = 0; m < f; ++m) {
      for (std::size_t j = 0; j < t; ++j) v[j * f + m] = mel_major[m * t + j];
    }
    if (cfg_.standardize_input) {
      audio::Spectrogram s{f, t, std::move(v)};
      v = audio::standardized(std::move(s)).values;
    }
    return Tensor({t, 1, f}, std::move(v));
  }

  TemporalForward forward_parts(const Tensor& x, double l_seg,
                                std::span<const double> visual = {}) const {
    if (cfg_.multimodal != !visual.empty()) {
      throw ContractError(cfg_.multimodal ? "multimodal model requires a visual embedding"
                                          : "unimodal model does not take a visual embedding");
    }
    if (cfg_.multimodal && visual.size() != cfg_.visual_dim) {
      throw DimensionError("visual embedding must have " + std::to_string(cfg_.visual_dim) + " values");
    }
    if (!std::isfinite(l_seg)) throw NumericError("non-finite l_seg input");
    const auto freqs = cfg_.freq_lengths();
    const auto frames = cfg_.frame_counts();
    Tensor h = x;
    check(h, "input");
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& blk = blocks_[b];
      const std::size_t c = cfg_.channels(b), f = freqs[b + 1];
      const std::string name = "conv" + std::to_string(b);
      h = conv1d(h, blk.kernels, cfg_.conv_stride, blk.conv_bias);       // [T, C, F']
      h = matmul(blk.time_w, reshape(h, {frames[b], c * f}));             // [T', C*F']
      h = layer_norm(h, blk.norm.gamma, blk.norm.beta);
      h = swap_last2(reshape(h, {frames[b + 1], c, f}));                  // [T', F', C]
      h = swap_last2(swiglu(h, blk.glu_w, blk.glu_v));                     // [T', C, F']
      check(h, name);
    }
    h = add(in_proj_(reshape(h, {frames.back(), h.numel() / frames.back()})), pe_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      h = layers_[l](h);
      check(h, "encoder" + std::to_string(l));
    }
    TemporalForward out;
    out.f_audio = l2_normalize(audio_fc2_(silu(audio_fc1_(flatten(h)))));
    check(out.f_audio, "audio_head");
    const Tensor ls = Tensor::vector({l_seg});
    out.f_scene = l2_normalize(add(scene_fc2_(silu(scene_fc1_(ls))), e_scene_));
    check(out.f_scene, "scene");
    std::vector<Tensor> parts{out.f_audio, out.f_scene};
    if (cfg_.multimodal) {
      const Tensor v = Tensor::vector(std::vector<double>(visual.begin(), visual.end()));
      out.f_visual = l2_normalize(visual_proj_(v));
      check(out.f_visual, "visual_proj");
      parts.push_back(out.f_visual);
    }
    out.probability = sigmoid(head_fc2_(silu(head_fc1_(concat_last(parts)))));
    check(out.probability, "head");
    return out;
  }

  Tensor forward(const Tensor& x, double l_seg, std::span<const double> visual = {}) const {
    return forward_parts(x, l_seg, visual).probability;
  }

  double predict(std::span<const double> mel_major, double l_seg, std::span<const double> visual = {}) const {
    NoGradGuard guard;
    return forward(input_tensor(mel_major), l_seg, visual).item();
  }

 private:
  static void check(const Tensor& t, const std::string& layer) {
    if (!t.all_finite()) throw NumericError("non-finite activation in layer '" + layer + "'");
  }

  TemporalModelConfig cfg_;
  ParameterSet params_;
  std::vector<ConvBlock> blocks_;
  LinearParams in_proj_;
  Tensor pe_;
  std::vector<TransformerLayer> layers_;
  LinearParams audio_fc1_, audio_fc2_;
  LinearParams scene_fc1_, scene_fc2_;
  Tensor e_scene_;
  LinearParams visual_proj_;
  LinearParams head_fc1_, head_fc2_;
};

}  // namespace concertcut::temporal
