#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "concertcut/tensor/optim.hpp"
#include "support/gradient_cases.hpp"

namespace concertcut {
namespace {

using ::concertcut::testing::random_tensor;

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(Matmul, IdentityCase) {
  auto eye = Tensor({2, 2}, {1, 0, 0, 1});
  auto b = Tensor({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(eye, b)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, DotProduct) {
  auto r = matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(r.item(), 11.0);
}

TEST(Matmul, ZeroLeftOperand) {
  Rng rng(3);
  auto r = matmul(Tensor::zeros({2, 3}), random_tensor({3, 4}, rng, -1, 1, false));
  EXPECT_EQ(r.shape(), (Shape{2, 4}));
  for (double v : r.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, ResultDoesNotDependOnBufferAlignment) {
  Rng rng(3);
  for (const std::size_t n : {3, 7, 13, 40}) {
    std::vector<double> a(n * n + 8), b(n * n + 8);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    std::vector<double> ref(n * n);
    detail::gemm({a.data(), n, n}, {b.data(), n, n}, ref.data(), false);
    for (std::size_t off = 1; off < 8; ++off) {
      std::vector<double> sa(a.size()), sb(b.size());
      std::copy_n(a.data(), n * n, sa.data() + off);
      std::copy_n(b.data(), n * n, sb.data() + off);
      std::vector<double> out(n * n + off);
      detail::gemm({sa.data() + off, n, n}, {sb.data() + off, n, n}, out.data() + off, false);
      EXPECT_TRUE(std::equal(ref.begin(), ref.end(), out.begin() + static_cast<std::ptrdiff_t>(off)))
          << "n=" << n << " offset=" << off;
    }
  }
}

TEST(Linear, BiasGradientIsSequentialRowSum) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng.uniform_int(40), d = 1 + rng.uniform_int(9), h = 1 + rng.uniform_int(11);
    const auto x = random_tensor({rows, d}, rng);
    const auto w = random_tensor({d, h}, rng);
    const auto b = random_tensor({h}, rng, -1, 1, true);
    const auto weights = random_tensor({rows, h}, rng);
    sum(mul(linear(x, w, b), weights)).backward();
    for (std::size_t j = 0; j < h; ++j) {
      double expect = 0.0;
      for (std::size_t r = 0; r < rows; ++r) expect += weights.data()[r * h + j];
      EXPECT_EQ(b.grad()[j], expect);
    }
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST(Conv1d, IdentityKernel) {
  auto r = conv1d(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 1, 1}, {1}), 1);
  EXPECT_EQ(values(r), (std::vector<double>{1, 2, 3}));
}

TEST(Conv1d, SlidingSums) {
  auto r = conv1d(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 1, 2}, {1, 1}), 1);
  EXPECT_EQ(values(r), (std::vector<double>{3, 5}));
}

TEST(Conv1d, StrideWalk) {
  auto r = conv1d(Tensor({1, 4}, {1, 2, 3, 4}), Tensor({1, 1, 2}, {1, 0}), 2);
  EXPECT_EQ(values(r), (std::vector<double>{1, 3}));
}

TEST(Conv1d, KernelLongerThanInputThrows) {
  EXPECT_THROW(conv1d(Tensor({1, 2}, {1, 2}), Tensor({1, 1, 3}, {1, 1, 1}), 1), DimensionError);
}

TEST(Conv1d, OutputLengthFormula) {
  Rng rng(1);
  auto x = random_tensor({5, 3, 128}, rng, -1, 1, false);
  auto k = random_tensor({16, 3, 5}, rng, -1, 1, false);
  auto r = conv1d(x, k, 2);
  EXPECT_EQ(r.shape(), (Shape{5, 16, (128 - 5) / 2 + 1}));
}

TEST(LayerNorm, ConstantVectorNormalizesToZero) {
  auto r = layer_norm(Tensor({3}, {5, 5, 5}), Tensor::ones({3}), Tensor::zeros({3}));
  for (double v : r.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(LayerNorm, AlreadyStandardized) {
  auto r = layer_norm(Tensor({2}, {-1, 1}), Tensor::ones({2}), Tensor::zeros({2}), 1e-12);
  EXPECT_NEAR(r.data()[0], -1.0, 1e-9);
  EXPECT_NEAR(r.data()[1], 1.0, 1e-9);
}

TEST(LayerNorm, AffineDominatesWithZeroGamma) {
  auto r = layer_norm(Tensor({2}, {3.5, -8}), Tensor::zeros({2}), Tensor({2}, {7, 7}));
  EXPECT_EQ(values(r), (std::vector<double>{7, 7}));
}

TEST(LayerNorm, RejectsBadParameters) {
  EXPECT_THROW(layer_norm(Tensor({2}, {1, 2}), Tensor::ones({3}), Tensor::zeros({3})),
               DimensionError);
  EXPECT_THROW(layer_norm(Tensor({2}, {1, 2}), Tensor::ones({2}), Tensor::zeros({2}), 0.0),
               ConfigError);
}

TEST(SwiGlu, Values) {
  auto one = Tensor({1, 1}, {1});
  EXPECT_DOUBLE_EQ(swiglu(Tensor({1}, {0}), one, one).item(), 0.0);
  EXPECT_NEAR(swiglu(Tensor({1}, {1}), one, one).item(), 0.7310585786300049, 1e-12);
  EXPECT_DOUBLE_EQ(swiglu(Tensor({1}, {1}), one, Tensor({1, 1}, {0})).item(), 0.0);
}

TEST(SwiGlu, ShapeMismatchThrows) {
  EXPECT_THROW(swiglu(Tensor({2}, {1, 2}), Tensor::ones({2, 3}), Tensor::ones({2, 2})),
               DimensionError);
}

TEST(Activations, SoftmaxSigmoid) {
  const double c = 2.7;
  const auto uniform = softmax(Tensor({3}, {c, c, c}));
  for (double v : uniform.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
  auto s = softmax(Tensor({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
  EXPECT_NEAR(s.data()[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(s.data()[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(s.data()[2], 3.0 / 6.0, 1e-15);
}

TEST(Activations, SoftmaxRowsAreDistributions) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({4, 9}, rng, -50, 50, false);
    auto s = softmax(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        const double v = s.at({r, j});
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
  auto huge = softmax(Tensor({2}, {1e308, -1e308}));
  EXPECT_TRUE(huge.all_finite());
}

TEST(BceLoss, ClosedForms) {
  EXPECT_NEAR(bce_loss(Tensor::scalar(0.5), Tensor::scalar(1)).item(), std::numbers::ln2, 1e-12);
  EXPECT_LE(bce_loss(Tensor({2}, {1, 0}), Tensor({2}, {1, 0})).item(), 1.2e-7);
  EXPECT_NEAR(bce_loss(Tensor({2}, {0.9, 0.1}), Tensor({2}, {1, 0})).item(), -std::log(0.9),
              1e-12);
  EXPECT_THROW(bce_loss(Tensor({2}, {0.5, 0.5}), Tensor({1}, {1})), DimensionError);
}

TEST(Backward, SumGivesOnes) {
  Rng rng(5);
  auto x = random_tensor({2, 3}, rng);
  sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwoX) {
  auto x = Tensor({1}, {3}, true);
  sum(square(x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarIsContractError) {
  auto x = Tensor({2}, {1, 2}, true);
  EXPECT_THROW(square(x).backward(), ContractError);
}

TEST(Backward, NoGradGuardSkipsRecording) {
  auto x = Tensor({2}, {1, 2}, true);
  NoGradGuard guard;
  auto y = sum(square(x));
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, SharedSubexpressionAccumulates) {
  auto x = Tensor({1}, {2}, true);
  auto y = mul(x, x);
  sum(add(y, y)).backward();  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto cases = ::concertcut::testing::tensor_gradient_cases();
  const auto& c = cases.at(GetParam());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = c.run(seed);
    EXPECT_LE(r.max_rel_error, 1e-4) << c.name << " seed " << seed << " tensor " << r.worst_tensor;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Range<std::size_t>(0, ::concertcut::testing::tensor_gradient_cases().size()),
                         [](const auto& info) {
                           return ::concertcut::testing::tensor_gradient_cases()[info.param].name;
                         });

ParameterSet single_param(double theta, double grad) {
  ParameterSet ps;
  auto& t = ps.add("theta", Tensor::scalar(theta));
  t.mutable_grad()[0] = grad;
  return ps;
}

TEST(Optimizer, ZeroGradZeroDecayIsIdentity) {
  Rng rng(2);
  ParameterSet ps;
  auto& t = ps.add("w", random_tensor({3, 3}, rng));
  const auto before = values(t);
  std::fill(t.mutable_grad().begin(), t.mutable_grad().end(), 0.0);
  for (auto kind : {OptimizerKind::adam, OptimizerKind::adamw}) {
    Optimizer opt({kind, 0.1, 0.9, 0.999, 1e-8, 0.0}, ps);
    for (int i = 0; i < 5; ++i) opt.step(ps);
  }
  EXPECT_EQ(values(t), before);
}

TEST(Optimizer, FirstAdamStep) {
  auto ps = single_param(1.0, 1.0);
  Optimizer opt({OptimizerKind::adam, 0.1, 0.9, 0.999, 1e-8, 0.0}, ps);
  opt.step(ps);
  EXPECT_NEAR(ps.entries()[0].second.item(), 0.9, 1e-8);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Optimizer, DecoupledDecayOnly) {
  auto ps = single_param(1.0, 0.0);
  Optimizer opt({OptimizerKind::adamw, 0.1, 0.9, 0.999, 1e-8, 0.01}, ps);
  opt.step(ps);
  EXPECT_NEAR(ps.entries()[0].second.item(), 0.999, 1e-15);
}

TEST(Optimizer, MissingGradientIsContractError) {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  Optimizer opt({}, ps);
  EXPECT_THROW(opt.step(ps), ContractError);
}

TEST(LrSchedule, WarmupAndDecay) {
  LrSchedule s{1.0, 5, 50};
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 0.2);
  EXPECT_DOUBLE_EQ(lr_at(s, 4), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 5), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 50), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 80), 0.0);
  for (std::size_t e = 5; e < 50; ++e) EXPECT_GE(lr_at(s, e), lr_at(s, e + 1));
  EXPECT_THROW(lr_at(LrSchedule{1.0, 6, 5}, 0), ConfigError);
}

TEST(SinusoidalPe, KnownValues) {
  auto pe = sinusoidal_pe(4, 6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(pe.at({0, i}), i % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(sinusoidal_pe(2, 2).at({1, 0}), 0.8414709848078965, 1e-15);
  auto big = sinusoidal_pe(64, 32);
  for (double v : big.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(values(big), values(sinusoidal_pe(64, 32)));
  EXPECT_FALSE(big.requires_grad());
  EXPECT_THROW(sinusoidal_pe(4, 5), ConfigError);
}

TEST(TransformerLayer, SingleTokenAttendsToItself) {
  Rng rng(9);
  ParameterSet ps;
  auto layer = TransformerLayer::make(ps, "t", 8, 4, 4, rng);
  auto x = random_tensor({1, 8}, rng, -1, 1, false);
  // With one token the attention output is o(v(ln1(x))).
  auto expected_attn = layer.o(layer.v(layer.ln1(x)));
  auto attn = layer.attention(layer.ln1(x));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(attn.data()[i], expected_attn.data()[i], 1e-12);
}

TEST(TransformerLayer, ZeroOutputProjectionsGiveIdentity) {
  Rng rng(4);
  ParameterSet ps;
  auto layer = TransformerLayer::make(ps, "t", 8, 4, 4, rng);
  layer.o.zero_fill();
  layer.ffn_out.zero_fill();
  auto x = random_tensor({6, 8}, rng, -1, 1, false);
  EXPECT_EQ(values(layer(x)), values(x));
}

TEST(TransformerLayer, HeadDivisibilityIsConfigError) {
  Rng rng(1);
  ParameterSet ps;
  EXPECT_THROW(TransformerLayer::make(ps, "t", 10, 4, 4, rng), ConfigError);
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  auto nan = Tensor({2}, {1, std::nan("")});
  EXPECT_FALSE(nan.all_finite());
}

}  // namespace
}  // namespace concertcut
