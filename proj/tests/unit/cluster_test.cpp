#include <gtest/gtest.h>

#include <cmath>

#include "concertcut/cluster/triplets.hpp"
#include "support/oracles.hpp"

namespace concertcut::cluster {
namespace {

using testing::planted_blobs;
using testing::same_partition;

TEST(Pca, SingleAxisData) {
  Rng rng(1);
  Matrix x = Matrix::Zero(50, 4);
  for (int i = 0; i < 50; ++i) x(i, 2) = rng.normal() * 3.0 + 1.0;
  const auto r = pca_reduce(x);
  EXPECT_EQ(r.components, 1u);
  EXPECT_NEAR(std::abs(r.basis(2, 0)), 1.0, 1e-12);
  EXPECT_NEAR(r.explained, 1.0, 1e-12);
}

TEST(Pca, ComponentCountMatchesIndependentEigenSum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Matrix x(200, 3);
    for (int i = 0; i < 200; ++i) {
      for (int d = 0; d < 3; ++d) x(i, d) = rng.normal();
    }
    // Oracle: eigenvalues of the covariance via a separate solver on the
    // unscaled scatter matrix, summed in descending order.
    const Matrix c = x.rowwise() - x.colwise().mean();
    Eigen::EigenSolver<Matrix> es(c.transpose() * c);
    std::vector<double> ev;
    for (int i = 0; i < 3; ++i) ev.push_back(es.eigenvalues()(i).real());
    std::sort(ev.rbegin(), ev.rend());
    const double total = ev[0] + ev[1] + ev[2];
    std::size_t m = 0;
    double cum = 0;
    while (cum / total < 0.66) cum += ev[m++];
    EXPECT_EQ(pca_reduce(x).components, m) << "seed " << seed;
  }
}

TEST(Pca, BasisOrthonormal) {
  Rng rng(3);
  Matrix x(100, 12);
  for (int i = 0; i < 100; ++i) {
    for (int d = 0; d < 12; ++d) x(i, d) = rng.normal() * (1.0 + d);
  }
  const auto r = pca_reduce(x, 0.95);
  const Matrix g = r.basis.transpose() * r.basis;
  EXPECT_TRUE(g.isApprox(Matrix::Identity(g.rows(), g.cols()), 1e-9));
  EXPECT_LE((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, ReconstructionErrorMonotone) {
  Rng rng(4);
  Matrix x(80, 6);
  for (int i = 0; i < 80; ++i) {
    for (int d = 0; d < 6; ++d) x(i, d) = rng.normal() * (6.0 - d);
  }
  double prev = INFINITY;
  for (double v : {0.2, 0.4, 0.6, 0.8, 0.95, 1.0}) {
    const auto r = pca_reduce(x, v);
    const Matrix c = x.rowwise() - r.mean.transpose();
    const double err = (c - r.reduced * r.basis.transpose()).squaredNorm();
    EXPECT_LE(err, prev + 1e-9);
    prev = err;
  }
}

TEST(Pca, ZeroVarianceIsDegenerate) {
  Matrix x = Matrix::Constant(10, 3, 2.5);
  EXPECT_THROW(pca_reduce(x), DegenerateError);
}

TEST(KMeans, TwoPairs) {
  Matrix x(4, 1);
  x << 0.0, 0.1, 10.0, 10.1;
  const auto r = kmeans(x, 2, 1);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_NE(r.labels[0], r.labels[2]);
}

TEST(KMeans, KEqualsN) {
  Rng rng(2);
  Matrix x(7, 2);
  for (int i = 0; i < 7; ++i) x.row(i) << rng.normal(), rng.normal();
  const auto r = kmeans(x, 7, 3);
  EXPECT_NEAR(r.inertia, 0.0, 1e-20);
  EXPECT_EQ(cluster_count(r.labels), 7u);
  EXPECT_THROW(kmeans(x, 8, 3), ContractError);
}

TEST(KMeans, RecoversPlantedBlobs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto b = planted_blobs(6, 120, 6, 10.0, rng);
    EXPECT_TRUE(same_partition(kmeans(b.x, 6, seed).labels, b.labels)) << seed;
  }
}

TEST(KMeans, InertiaNonIncreasing) {
  Rng rng(5);
  const auto b = planted_blobs(5, 200, 8, 2.0, rng);
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng r2(s);
    const auto res = kmeans_once(b.x, 5, r2);
    for (std::size_t i = 1; i < res.inertia_history.size(); ++i) {
      EXPECT_LE(res.inertia_history[i], res.inertia_history[i - 1] + 1e-9);
    }
  }
}

TEST(KMeans, DeterministicPerSeed) {
  Rng rng(6);
  const auto b = planted_blobs(4, 100, 4, 3.0, rng);
  EXPECT_EQ(kmeans(b.x, 4, 9).labels, kmeans(b.x, 4, 9).labels);
}

TEST(Silhouette, HandComputed) {
  Matrix x(4, 1);
  x << 0.0, 0.1, 10.0, 10.1;
  // a = 0.1 everywhere; b = 10.05 for the outer points, 9.95 for the inner.
  const double want = ((10.05 - 0.1) / 10.05 + (9.95 - 0.1) / 9.95) / 2.0;
  EXPECT_NEAR(silhouette(x, {0, 0, 1, 1}), want, 1e-12);
}

TEST(Silhouette, IdenticalPointsScoreZero) {
  Matrix x = Matrix::Zero(6, 2);
  EXPECT_EQ(silhouette(x, {0, 0, 0, 1, 1, 1}), 0.0);
}

TEST(Silhouette, SingletonsScoreZero) {
  Matrix x(3, 1);
  x << 0.0, 1.0, 5.0;
  // point 2 is a singleton; points 0 and 1: a = 1, b = 5 and 4.
  const double want = ((5.0 - 1.0) / 5.0 + (4.0 - 1.0) / 4.0) / 3.0;
  EXPECT_NEAR(silhouette(x, {0, 0, 1}), want, 1e-12);
}

TEST(Silhouette, OneClusterIsError) {
  Matrix x(3, 1);
  x << 0, 1, 2;
  EXPECT_THROW(silhouette(x, {0, 0, 0}), ContractError);
}

// Direct O(N^2) evaluation of the definition.
double brute_silhouette(const Matrix& x, const std::vector<std::size_t>& l) {
  const std::size_t n = l.size(), k = cluster_count(l);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(k, 0.0);
    std::vector<double> cnt(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[l[j]] += (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
      cnt[l[j]] += 1;
    }
    if (cnt[l[i]] == 0) continue;
    const double a = sum[l[i]] / cnt[l[i]];
    double b = INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      if (c != l[i] && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

TEST(Silhouette, PlantedBeatsRandomLabels) {
  Rng rng(7);
  const auto b = planted_blobs(3, 30, 3, 6.0, rng);
  const double planted = silhouette(b.x, b.labels);
  EXPECT_NEAR(planted, brute_silhouette(b.x, b.labels), 1e-12);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::size_t> random(30);
    for (std::size_t i = 0; i < 30; ++i) random[i] = i < 3 ? i : rng.uniform_int(3);
    EXPECT_NEAR(silhouette(b.x, random), brute_silhouette(b.x, random), 1e-12);
    EXPECT_LT(silhouette(b.x, random), planted);
  }
}

TEST(SelectK, SixBlobs) {
  Rng rng(8);
  const auto b = planted_blobs(6, 200, 6, 10.0, rng);
  const auto a = select_k(b.x, 1);
  EXPECT_EQ(a.k, 6u);
  EXPECT_TRUE(same_partition(a.labels, b.labels));
  EXPECT_EQ(a.silhouette_by_k.size(), 14u);
}

TEST(SelectK, TwoBlobs) {
  Rng rng(9);
  const auto b = planted_blobs(2, 100, 4, 10.0, rng);
  EXPECT_EQ(select_k(b.x, 1).k, 2u);
}

TEST(SelectK, Errors) {
  EXPECT_THROW(select_k(Matrix::Constant(10, 2, 1.0), 1), DegenerateError);
  EXPECT_THROW(select_k(Matrix::Zero(2, 2), 1), ContractError);
}

TEST(SelectK, SmallNCapsRange) {
  Matrix x(5, 1);
  x << 0, 0.1, 5, 5.1, 10;
  const auto a = select_k(x, 1);
  EXPECT_LE(a.k, 4u);
  EXPECT_EQ(a.silhouette_by_k.size(), 3u);
}

TEST(FilterVideos, Boundary) {
  std::vector<ClusterAssignment> as(3);
  as[0].video_id = "a";
  as[0].k = 6;
  as[1].video_id = "b";
  as[1].k = 5;
  as[2].video_id = "c";
  as[2].k = 9;
  EXPECT_EQ(filter_videos(as), (std::vector<std::string>{"a", "c"}));
  EXPECT_TRUE(filter_videos({}).empty());
}

ClusterAssignment toy_video(std::size_t k, std::size_t per, std::uint64_t seed) {
  // Shots of random length cycling through k clusters.
  Rng rng(seed);
  ClusterAssignment a;
  a.video_id = "toy" + std::to_string(seed);
  a.k = k;
  for (std::size_t s = 0; s < per * k; ++s) {
    const std::size_t len = 1 + rng.uniform_int(6);
    const std::size_t c = rng.uniform_int(k);
    for (std::size_t i = 0; i < len; ++i) a.labels.push_back(c);
  }
  for (std::size_t c = 0; c < k; ++c) a.labels.push_back(c);
  return a;
}

TEST(Triplets, TwoClustersYieldNothing) {
  EXPECT_TRUE(build_triplets(toy_video(2, 5, 1)).triplets.empty());
}

TEST(Triplets, AllPassExclusionValidator) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto a = toy_video(6 + seed % 4, 6, seed);
    const auto r = build_triplets(a, 9, seed);
    EXPECT_EQ(r.triplets.size() + r.skipped, a.labels.size() - 1);
    for (const auto& t : r.triplets) ASSERT_EQ(validate_triplet(t, a.labels), "") << seed;
  }
}

TEST(Triplets, SmallPoolIsSkipped) {
  ClusterAssignment a;
  a.video_id = "s";
  a.k = 6;
  a.labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 2, 3, 4, 5};
  const auto r = build_triplets(a);
  EXPECT_GT(r.skipped, 0u);
  for (const auto& t : r.triplets) EXPECT_EQ(validate_triplet(t, a.labels), "");
}

TEST(Triplets, DeterministicAndPositionSpread) {
  const auto a = toy_video(8, 20, 3);
  const auto r1 = build_triplets(a, 9, 5), r2 = build_triplets(a, 9, 5), r3 = build_triplets(a, 9, 6);
  EXPECT_EQ(r1.triplets, r2.triplets);
  EXPECT_NE(r1.triplets, r3.triplets);
  std::vector<std::size_t> hist(10, 0);
  for (const auto& t : r1.triplets) ++hist[t.target_index];
  for (auto h : hist) EXPECT_GT(h, 0u);
}

TEST(Triplets, ValidatorCatchesViolations) {
  const auto a = toy_video(6, 6, 2);
  auto t = build_triplets(a).triplets.at(0);
  auto bad = t;
  bad.candidates[(bad.target_index + 1) % 10] = bad.anchor_frame;
  EXPECT_NE(validate_triplet(bad, a.labels), "");
  bad = t;
  bad.target_index = (t.target_index + 1) % 10;
  EXPECT_NE(validate_triplet(bad, a.labels), "");
}

TEST(Medoids, OnePerCluster) {
  Matrix x(6, 1);
  x << 0, 1, 2, 10, 11, 12;
  const auto m = medoids(x, {0, 0, 0, 1, 1, 1});
  EXPECT_EQ(m, (std::vector<std::size_t>{1, 4}));
}

}  // namespace
}  // namespace concertcut::cluster
