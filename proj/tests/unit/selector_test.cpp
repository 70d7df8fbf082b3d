#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "concertcut/selector/selector.hpp"
#include "support/synthetic.hpp"

namespace concertcut::selector {
namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

TEST(ScoreCandidates, IdenticalCandidatesAreUniform) {
  MatchingModule m({16, 8, 10}, 1);
  Rng rng(2);
  const auto a = random_vec(16, rng), c = random_vec(16, rng);
  const auto s = m.score_candidates(a, std::vector<std::vector<double>>(10, c));
  for (double p : s.distribution) EXPECT_NEAR(p, 0.1, 1e-12);
}

TEST(ScoreCandidates, ZeroWeightsAreUniform) {
  MatchingModule m({16, 8, 10}, 1);
  m.query().zero_fill();
  m.key().zero_fill();
  Rng rng(3);
  std::vector<std::vector<double>> cands;
  for (int i = 0; i < 10; ++i) cands.push_back(random_vec(16, rng));
  const auto s = m.score_candidates(random_vec(16, rng), cands);
  for (double l : s.logits) EXPECT_EQ(l, 0.0);
  for (double p : s.distribution) EXPECT_NEAR(p, 0.1, 1e-12);
}

TEST(ScoreCandidates, ScalarHandTrace) {
  MatchingModule m({1, 1, 2}, 1);
  m.query().zero_fill();
  m.key().zero_fill();
  m.query().weight.mutable_data()[0] = 1.0;
  m.key().weight.mutable_data()[0] = 1.0;
  const std::vector<double> a{1.0};
  const auto s = m.score_candidates(a, {{1.0}, {-1.0}});
  const double t = std::tanh(1.0);
  EXPECT_NEAR(s.logits[0], t * t, 1e-12);
  EXPECT_NEAR(s.logits[0], 0.58003, 1e-5);
  EXPECT_NEAR(s.logits[1], -t * t, 1e-12);
  EXPECT_NEAR(s.distribution[0], 1.0 / (1.0 + std::exp(-2 * t * t)), 1e-12);
  EXPECT_NEAR(s.distribution[0], 0.7615, 5e-4);
  EXPECT_NEAR(s.distribution[1], 0.2385, 5e-4);
}

TEST(ScoreCandidates, PermutationEquivariant) {
  MatchingModule m({12, 6, 10}, 4);
  Rng rng(5);
  std::vector<std::vector<double>> cands;
  for (int i = 0; i < 10; ++i) cands.push_back(random_vec(12, rng));
  const auto a = random_vec(12, rng);
  const auto base = m.score_candidates(a, cands);
  EXPECT_NEAR(std::accumulate(base.distribution.begin(), base.distribution.end(), 0.0), 1.0, 1e-12);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::vector<double>> shuffled;
    for (auto p : perm) shuffled.push_back(cands[p]);
    const auto s = m.score_candidates(a, shuffled);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(s.logits[i], base.logits[perm[i]], 1e-12);
  }
}

TEST(ScoreCandidates, DimensionErrors) {
  MatchingModule m({4, 2, 3}, 1);
  const std::vector<double> a(4, 0.0), bad(3, 0.0);
  EXPECT_THROW(m.score_candidates(bad, {a, a, a}), DimensionError);
  EXPECT_THROW(m.score_candidates(a, {a, bad, a}), DimensionError);
  EXPECT_THROW(m.logits(Tensor::zeros({2, 4}), Tensor::zeros({3, 3, 4})), DimensionError);
}

TEST(SelectorLoss, UniformPrediction) {
  const Tensor p = Tensor::full({1, 10}, 0.1);
  const std::size_t target = 3;
  const double want = (-std::log(0.1) - 9.0 * std::log(0.9)) / 10.0;
  EXPECT_NEAR(selector_loss(p, std::span(&target, 1)).item(), want, 1e-12);
  EXPECT_NEAR(want, 0.32508, 1e-5);
}

TEST(SelectorLoss, OneHotIsMinimum) {
  std::vector<double> v(10, 0.0);
  v[2] = 1.0;
  const std::size_t target = 2;
  const double at_target = selector_loss(Tensor({1, 10}, v), std::span(&target, 1)).item();
  EXPECT_LT(at_target, 1e-6);
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> q(10);
    double sum = 0;
    for (auto& x : q) sum += (x = rng.uniform());
    for (auto& x : q) x /= sum;
    EXPECT_GT(selector_loss(Tensor({1, 10}, q), std::span(&target, 1)).item(), at_target);
  }
}

TEST(SelectorLoss, TargetOutOfRange) {
  const std::size_t target = 10;
  EXPECT_THROW(selector_loss(Tensor::full({1, 10}, 0.1), std::span(&target, 1)), ContractError);
}

struct Corpus {
  std::vector<SelectorExample> train, val;
};

Corpus small_corpus(std::uint64_t seed, std::size_t n = 200) {
  Rng rng(seed);
  const auto centres = testing::cluster_centres(10, 16, rng, 3.0);
  auto all = testing::separable_triplets(n, centres, 10, 0.3, rng);
  Corpus c;
  c.val.assign(all.begin() + static_cast<std::ptrdiff_t>(n * 4 / 5), all.end());
  all.resize(n * 4 / 5);
  c.train = std::move(all);
  return c;
}

TEST(TrainSelector, ZeroLearningRateLeavesParameters) {
  const auto c = small_corpus(1, 60);
  MatchingModule m({16, 8, 10}, 3);
  const auto before = m.params().snapshot();
  SelectorTrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 0.0;
  train_selector(m, c.train, c.val, cfg, 1);
  EXPECT_EQ(m.params().snapshot(), before);
}

TEST(TrainSelector, SameSeedSameCurve) {
  const auto c = small_corpus(2, 80);
  SelectorTrainConfig cfg;
  cfg.epochs = 4;
  cfg.lr = 1e-3;
  MatchingModule m1({16, 8, 10}, 3), m2({16, 8, 10}, 3);
  const auto r1 = train_selector(m1, c.train, c.val, cfg, 7);
  const auto r2 = train_selector(m2, c.train, c.val, cfg, 7);
  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) EXPECT_EQ(r1.history[i].train_loss, r2.history[i].train_loss);
  EXPECT_EQ(m1.params().snapshot(), m2.params().snapshot());
}

TEST(TrainSelector, LearnsSeparableTask) {
  const auto c = small_corpus(3);
  MatchingModule m({16, 8, 10}, 4);
  SelectorTrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 3e-3;
  const auto r = train_selector(m, c.train, c.val, cfg, 1);
  EXPECT_GE(r.best_recall_at_1, 90.0);
  EXPECT_GT(r.history.front().train_loss, r.history.back().train_loss);
  // The module is left at the best epoch.
  EXPECT_DOUBLE_EQ(eval::recall_at_k(score_examples(m, c.val), targets_of(c.val), 1), r.best_recall_at_1);
}

TEST(TrainSelector, CrossEntropyVariantAlsoLearns) {
  const auto c = small_corpus(4);
  MatchingModule m({16, 8, 10}, 4);
  SelectorTrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 3e-3;
  cfg.cross_entropy = true;
  EXPECT_GE(train_selector(m, c.train, c.val, cfg, 1).best_recall_at_1, 90.0);
}

TEST(TrainSelector, EmptySplitsRejected) {
  const auto c = small_corpus(5, 20);
  MatchingModule m({16, 8, 10}, 1);
  EXPECT_THROW(train_selector(m, {}, c.val, {}, 1), ContractError);
  EXPECT_THROW(train_selector(m, c.train, {}, {}, 1), ContractError);
}

}  // namespace
}  // namespace concertcut::selector
