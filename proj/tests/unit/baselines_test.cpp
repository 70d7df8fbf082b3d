#include <gtest/gtest.h>

#include <cmath>

#include "concertcut/baselines/baselines.hpp"

namespace concertcut::baselines {
namespace {

double positive_rate(auto&& draw, std::size_t n) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) pos += draw(i);
  return static_cast<double>(pos) / static_cast<double>(n);
}

TEST(PoissonScore, ClosedForms) {
  EXPECT_EQ(poisson_score(0.0), 0.0);
  EXPECT_NEAR(poisson_score(0.2), 1.0 - std::exp(-0.2), 1e-15);
  EXPECT_NEAR(poisson_score(0.2), 0.1812692, 5e-8);
  EXPECT_NEAR(poisson_score(std::log(2.0)), 0.5, 1e-15);
}

TEST(PoissonScore, StrictlyIncreasing) {
  double prev = -1.0;
  for (double l = 0.0; l < 10.0; l += 0.05) {
    const double s = poisson_score(l);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(PoissonClassify, EmpiricalRateMatchesScore) {
  Rng rng(123);
  const double rate = positive_rate([&](std::size_t) { return poisson_classify(0.2, rng); }, 100000);
  EXPECT_NEAR(rate, 1.0 - std::exp(-0.2), 0.005);
}

TEST(PoissonClassify, TinyLambdaNeverFires) {
  Rng rng(1);
  EXPECT_EQ(positive_rate([&](std::size_t) { return poisson_classify(1e-12, rng); }, 10000), 0.0);
}

TEST(PoissonClassify, SameSeedSameDecision) {
  const PoissonBaseline b{4.0, 3.0};
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(poisson_classify(b, s), poisson_classify(b, s));
}

TEST(PoissonDraw, MeanMatchesLambda) {
  Rng rng(9);
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) total += static_cast<double>(poisson_draw(2.5, rng));
  EXPECT_NEAR(total / 100000.0, 2.5, 0.03);
}

TEST(PoissonBaseline, LambdaFromStats) {
  temporal::SceneStats st{8.0 * 16000.0, 16000.0};
  const auto b = PoissonBaseline::from_stats(st);
  EXPECT_DOUBLE_EQ(b.lambda(), 4.0 / 8.0);
}

TEST(ExponentialScore, ClosedForms) {
  const ExponentialBaseline b{1.0 / 6.0};
  EXPECT_EQ(exponential_score(b, 0.0), 0.0);
  EXPECT_NEAR(exponential_score(b, 6.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(exponential_score(b, 6.0), 0.6321206, 5e-8);
  EXPECT_THROW(exponential_score(b, -1.0), ContractError);
}

TEST(ExponentialScore, MonotoneToOne) {
  const ExponentialBaseline b{0.3};
  double prev = -1.0;
  for (double t = 0.0; t < 60.0; t += 0.5) {
    const double s = exponential_score(b, t);
    EXPECT_GT(s, prev);
    prev = s;
  }
  EXPECT_LE(exponential_score(b, 1e6), 1.0);
  EXPECT_NEAR(exponential_score(b, 200.0), 1.0, 1e-12);
}

TEST(ExponentialClassify, ZeroElapsedAlwaysFires) {
  const ExponentialBaseline b{0.5};
  Rng rng(2);
  EXPECT_EQ(positive_rate([&](std::size_t) { return exponential_classify(b, 0.0, rng); }, 10000), 1.0);
}

TEST(ExponentialClassify, EmpiricalRateAtMean) {
  const ExponentialBaseline b{1.0 / 5.0};
  Rng rng(77);
  const double rate = positive_rate([&](std::size_t) { return exponential_classify(b, 5.0, rng); }, 100000);
  EXPECT_NEAR(rate, std::exp(-1.0), 0.005);
}

TEST(ExponentialClassify, SameSeedSameDecision) {
  const ExponentialBaseline b{0.25};
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_EQ(exponential_classify(b, 3.0, s), exponential_classify(b, 3.0, s));
}

}  // namespace
}  // namespace concertcut::baselines
