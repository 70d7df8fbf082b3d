#pragma once

// Whole-model gradient cases on tiny configurations.

#include "support/gradient_cases.hpp"
#include "concertcut/selector/selector.hpp"
#include "concertcut/temporal/model.hpp"

namespace concertcut::testing {

inline temporal::TemporalModelConfig tiny_temporal_config(bool multimodal = false) {
  temporal::TemporalModelConfig c;
  c.n_mels = 12;
  c.n_frames = 8;
  c.audio_dim = 8;
  c.conv_blocks = 1;
  c.conv_channels = 2;
  c.conv_kernel = 3;
  c.conv_stride = 2;
  c.time_reduction = 2;
  c.transformer_layers = 1;
  c.heads = 2;
  c.ffn_mult = 2;
  c.head_hidden = 6;
  c.multimodal = multimodal;
  c.visual_dim = 5;
  return c;
}

inline GradCheckResult temporal_model_case(std::uint64_t seed, bool multimodal) {
  Rng rng(seed);
  const auto cfg = tiny_temporal_config(multimodal);
  auto model = std::make_shared<temporal::TemporalModel>(cfg, derive_seed(seed, "init"));
  auto x = random_tensor({cfg.n_frames, 1, cfg.n_mels}, rng, -2, 2);
  const double l_seg = rng.uniform(-2, 2);
  std::vector<double> visual;
  if (multimodal) {
    for (std::size_t i = 0; i < cfg.visual_dim; ++i) visual.push_back(rng.uniform(-1, 1));
  }
  const Tensor y = Tensor::vector({static_cast<double>(rng.uniform_int(2))});
  auto inputs = model->params().entries();
  inputs.emplace_back("input", x);
  return check_gradients([=] { return bce_loss(model->forward(x, l_seg, visual), y); }, inputs);
}

inline GradCheckResult selector_case(std::uint64_t seed, bool cross_entropy) {
  Rng rng(seed);
  selector::SelectorConfig cfg{6, 4, 5};
  auto m = std::make_shared<selector::MatchingModule>(cfg, derive_seed(seed, "init"));
  auto a = random_tensor({3, 6}, rng);
  auto c = random_tensor({3, 5, 6}, rng);
  std::vector<std::size_t> targets{rng.uniform_int(5), rng.uniform_int(5), rng.uniform_int(5)};
  auto inputs = m->params().entries();
  inputs.emplace_back("anchors", a);
  inputs.emplace_back("candidates", c);
  return check_gradients(
      [=] {
        const Tensor s = m->logits(a, c);
        return cross_entropy ? selector::selector_ce_loss(s, targets)
                             : selector::selector_loss(softmax(s), targets);
      },
      inputs);
}

inline std::vector<GradientCase> model_gradient_cases() {
  return {
      {"temporal_model_unimodal", [](std::uint64_t s) { return temporal_model_case(s, false); }},
      {"temporal_model_multimodal", [](std::uint64_t s) { return temporal_model_case(s, true); }},
      {"selector_bce", [](std::uint64_t s) { return selector_case(s, false); }},
      {"selector_ce", [](std::uint64_t s) { return selector_case(s, true); }},
  };
}

inline std::vector<GradientCase> all_gradient_cases() {
  auto cases = tensor_gradient_cases();
  for (auto& c : model_gradient_cases()) cases.push_back(std::move(c));
  return cases;
}

}  // namespace concertcut::testing
