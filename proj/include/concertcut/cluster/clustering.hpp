#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "concertcut/core/error.hpp"
#include "concertcut/core/rng.hpp"

namespace concertcut::cluster {

using Matrix = Eigen::MatrixXd;  // rows are points

struct PcaResult {
  Matrix reduced;             // N x m
  Matrix basis;               // D x m, orthonormal columns
  Eigen::VectorXd mean;       // D
  std::vector<double> eigenvalues;  // all, descending
  std::size_t components = 0;
  double explained = 0.0;     // fraction kept
};

// Smallest number of principal axes explaining at least min_var of the variance.
inline PcaResult pca_reduce(const Matrix& x, double min_var = 0.66) {
  if (x.rows() < 2) throw ContractError("pca_reduce: need at least 2 rows");
  if (!(min_var > 0) || min_var > 1) throw ConfigError("pca_reduce: min_var must be in (0, 1]");
  if (!x.allFinite()) throw NumericError("pca_reduce: non-finite input");
  PcaResult r;
  r.mean = x.colwise().mean();
  const Matrix c = x.rowwise() - r.mean.transpose();
  const Matrix cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("pca_reduce: eigendecomposition failed");
  const auto& ev = es.eigenvalues();  // ascending
  const Eigen::Index d = ev.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    r.eigenvalues.push_back(std::max(0.0, ev(d - 1 - i)));
    total += r.eigenvalues.back();
  }
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  if (!(total > 1e-12 * scale)) throw DegenerateError("pca_reduce: data has zero variance");
  double cum = 0.0;
  std::size_t m = 0;
  while (m < r.eigenvalues.size()) {
    cum += r.eigenvalues[m];
    ++m;
    if (cum / total >= min_var - 1e-12) break;
  }
  r.components = m;
  r.explained = cum / total;
  r.basis.resize(x.cols(), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(j));
    // Fix the sign so the largest-magnitude coordinate is positive.
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    r.basis.col(static_cast<Eigen::Index>(j)) = v;
  }
  r.reduced = c * r.basis;
  return r;
}

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
};

inline double sq_dist(const Matrix& x, Eigen::Index i, const Matrix& c, Eigen::Index j) {
  return (x.row(i) - c.row(j)).squaredNorm();
}

// One k-means++ seeded Lloyd run.
inline KMeansResult kmeans_once(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iter = 300,
                                double tol = 1e-6) {
  const auto n = x.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix c(kk, x.cols());
  c.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 1; j < kk; ++j) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(x, i, c, j - 1));
      total += d2[static_cast<std::size_t>(i)];
    }
    Eigen::Index pick = 0;
    if (total > 0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[static_cast<std::size_t>(pick)];
        if (u < 0) break;
      }
      // Never pick a point that already coincides with a centre.
      while (d2[static_cast<std::size_t>(pick)] == 0.0 && pick > 0) --pick;
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    }
    c.row(j) = x.row(pick);
  }

  KMeansResult r;
  r.labels.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < kk; ++j) {
        const double d = sq_dist(x, i, c, j);
        if (d < bd) {
          bd = d;
          best = static_cast<std::size_t>(j);
        }
      }
      r.labels[static_cast<std::size_t>(i)] = best;
      inertia += bd;
    }
    r.inertia_history.push_back(inertia);
    r.iterations = it + 1;

    Matrix next = Matrix::Zero(kk, x.cols());
    std::vector<std::size_t> count(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(static_cast<Eigen::Index>(r.labels[static_cast<std::size_t>(i)])) += x.row(i);
      ++count[r.labels[static_cast<std::size_t>(i)]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] == 0) {
        // Empty cluster: move it to the point farthest from its centre.
        Eigen::Index far = 0;
        double fd = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = sq_dist(x, i, c, static_cast<Eigen::Index>(r.labels[static_cast<std::size_t>(i)]));
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        next.row(static_cast<Eigen::Index>(j)) = x.row(far);
      } else {
        next.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(count[j]);
      }
    }
    const double shift = (next - c).rowwise().norm().maxCoeff();
    c = std::move(next);
    if (shift < tol) break;
  }
  // Final assignment against the converged centres.
  r.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < kk; ++j) {
      const double d = sq_dist(x, i, c, j);
      if (d < bd) {
        bd = d;
        best = static_cast<std::size_t>(j);
      }
    }
    r.labels[static_cast<std::size_t>(i)] = best;
    r.inertia += bd;
  }
  r.centroids = std::move(c);
  return r;
}

struct KMeansConfig {
  std::size_t n_init = 8;
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

// Best of n_init restarts by inertia; labels are relabelled in order of first
// appearance so equal partitions compare equal.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansConfig& cfg = {}) {
  if (k == 0) throw ContractError("kmeans: k must be >= 1");
  if (k > static_cast<std::size_t>(x.rows())) {
    throw ContractError("kmeans: k = " + std::to_string(k) + " exceeds N = " + std::to_string(x.rows()));
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, cfg.n_init); ++r) {
    Rng rng(derive_seed(seed, "kmeans", r));
    auto res = kmeans_once(x, k, rng, cfg.max_iter, cfg.tol);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  std::vector<std::size_t> remap(k, k);
  std::size_t next = 0;
  for (auto& l : best.labels) {
    if (remap[l] == k) remap[l] = next++;
    l = remap[l];
  }
  Matrix c(best.centroids.rows(), best.centroids.cols());
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t to = remap[j] == k ? next++ : remap[j];
    c.row(static_cast<Eigen::Index>(to)) = best.centroids.row(static_cast<Eigen::Index>(j));
  }
  best.centroids = std::move(c);
  return best;
}

inline std::size_t cluster_count(const std::vector<std::size_t>& labels) {
  std::size_t k = 0;
  for (auto l : labels) k = std::max(k, l + 1);
  return k;
}

// Mean silhouette with Euclidean distance. Singletons score 0, as does a point
// with a = b = 0.
inline double silhouette(const Matrix& x, const std::vector<std::size_t>& labels) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n) throw DimensionError("silhouette: label count mismatch");
  const std::size_t k = cluster_count(labels);
  std::vector<std::size_t> size(k, 0);
  for (auto l : labels) ++size[l];
  std::size_t nonempty = 0;
  for (auto s : size) nonempty += s > 0;
  if (nonempty < 2) throw ContractError("silhouette: need at least 2 non-empty clusters");
  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[labels[j]] += (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
    }
    const std::size_t own = labels[i];
    if (size[own] <= 1) continue;
    const double a = sums[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own && size[c] > 0) b = std::min(b, sums[c] / static_cast<double>(size[c]));
    }
    const double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

struct ClusterAssignment {
  std::string video_id;
  std::size_t k = 0;
  std::vector<std::size_t> labels;
  double silhouette = 0.0;
  std::vector<double> silhouette_by_k;  // index i holds k = k_min + i
};

struct SelectKConfig {
  std::size_t k_min = 2;
  std::size_t k_max = 15;
  KMeansConfig kmeans;
};

// Silhouette-maximizing k over [k_min, min(k_max, N - 1)]; ties keep the smaller k.
inline ClusterAssignment select_k(const Matrix& x, std::uint64_t seed, const SelectKConfig& cfg = {}) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 3) throw ContractError("select_k: need at least 3 points");
  if (cfg.k_min < 2 || cfg.k_min > cfg.k_max) throw ConfigError("select_k: invalid k range");
  const Eigen::VectorXd mu = x.colwise().mean();
  if (((x.rowwise() - mu.transpose()).squaredNorm()) == 0.0) {
    throw DegenerateError("select_k: all points are identical");
  }
  const std::size_t hi = std::min(cfg.k_max, n - 1);
  ClusterAssignment best;
  best.silhouette = -std::numeric_limits<double>::infinity();
  for (std::size_t k = cfg.k_min; k <= hi; ++k) {
    auto km = kmeans(x, k, derive_seed(seed, "k", k), cfg.kmeans);
    const std::size_t used = cluster_count(km.labels);
    const double s = used >= 2 ? silhouette(x, km.labels) : -1.0;
    best.silhouette_by_k.push_back(s);
    if (s > best.silhouette) {
      best.silhouette = s;
      best.k = k;
      best.labels = std::move(km.labels);
    }
  }
  if (best.k == 0) throw DegenerateError("select_k: no valid k in range");
  return best;
}

// Videos with at least min_clusters distinct clusters.
inline std::vector<std::string> filter_videos(const std::vector<ClusterAssignment>& assignments,
                                              std::size_t min_clusters = 6) {
  std::vector<std::string> keep;
  for (const auto& a : assignments) {
    if (a.k >= min_clusters) keep.push_back(a.video_id);
  }
  return keep;
}

// Frame closest to its cluster mean, per cluster.
inline std::vector<std::size_t> medoids(const Matrix& x, const std::vector<std::size_t>& labels) {
  const std::size_t k = cluster_count(labels);
  Matrix mean = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mean.row(static_cast<Eigen::Index>(labels[i])) += x.row(static_cast<Eigen::Index>(i));
    ++count[labels[i]];
  }
  std::vector<std::size_t> out(k, 0);
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j]) mean.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(count[j]);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double d = (x.row(static_cast<Eigen::Index>(i)) - mean.row(static_cast<Eigen::Index>(labels[i]))).squaredNorm();
    if (d < best[labels[i]]) {
      best[labels[i]] = d;
      out[labels[i]] = i;
    }
  }
  return out;
}

}  // namespace concertcut::cluster
