#include <doctest.h>

#include <functional>
#include <numeric>
#include <limits>
#include <random>

#include "lpal/cluster.hpp"
#include "lpal/error.hpp"
#include "lpal/model.hpp"
#include "oracles.hpp"

using namespace lpal;

namespace {

double sse(const Matrix& x, const std::vector<int>& a, std::size_t k) {
  Matrix mean(k, x.cols());
  std::vector<double> cnt(k, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    cnt[a[i]] += 1;
    for (std::size_t j = 0; j < x.cols(); ++j) mean(a[i], j) += x(i, j);
  }
  double s = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = x(i, j) - mean(a[i], j) / cnt[a[i]];
      s += d * d;
    }
  return s;
}

// Minimum SSE over every assignment of n points into k nonempty clusters.
double optimum(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  std::vector<int> a(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    if (i == n) {
      if (static_cast<std::size_t>(used) == k) best = std::min(best, sse(x, a, k));
      return;
    }
    for (int c = 0; c <= std::min<int>(used, static_cast<int>(k) - 1); ++c) {
      a[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("two obvious clusters in 1-D") {
  const Matrix x(4, 1, std::vector<double>{0, 1, 10, 11});
  const auto cl = kmeans(x, 2, 3);
  CHECK(cl.assignment[0] == cl.assignment[1]);
  CHECK(cl.assignment[2] == cl.assignment[3]);
  CHECK(cl.assignment[0] != cl.assignment[2]);
  const double lo = std::min(cl.centroids(0, 0), cl.centroids(1, 0));
  const double hi = std::max(cl.centroids(0, 0), cl.centroids(1, 0));
  CHECK(lo == 0.5);
  CHECK(hi == 10.5);
  CHECK(cl.inertia == doctest::Approx(optimum(x, 2)));
}

TEST_CASE("k = n and k = 1") {
  std::mt19937_64 rng(2);
  const Matrix x = oracle::random_matrix(9, 3, rng);
  const auto all = kmeans(x, 9, 1);
  CHECK(all.inertia == 0.0);
  const auto one = kmeans(x, 1, 1);
  for (auto a : one.assignment) CHECK(a == 0);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < 9; ++i) m += x(i, j);
    CHECK(one.centroids(0, j) == doctest::Approx(m / 9));
  }
  CHECK_THROWS_AS(kmeans(x, 10, 1), InvalidArgument);
  CHECK_THROWS_AS(kmeans(x, 0, 1), InvalidArgument);
}

TEST_CASE("Lloyd iterations never increase inertia") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = oracle::random_matrix(200, 3, rng);
    const auto cl = kmeans(x, 2 + trial % 9, trial);
    for (std::size_t t = 1; t < cl.inertia_history.size(); ++t)
      CHECK(cl.inertia_history[t] <= cl.inertia_history[t - 1] + 1e-9);
    for (auto a : cl.assignment) CHECK(a < static_cast<int>(2 + trial % 9));
    for (double v : cl.centroids.data()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("deterministic under seed, serial equals parallel") {
  std::mt19937_64 rng(19);
  const Matrix x = oracle::random_matrix(500, 4, rng);
  KmeansOptions ser;
  ser.exec = Exec::serial;
  const auto a = kmeans(x, 12, 5);
  const auto b = kmeans(x, 12, 5);
  const auto c = kmeans(x, 12, 5, ser);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  CHECK(a.assignment == c.assignment);
  CHECK(a.centroids == c.centroids);
}

TEST_CASE("restarts reach the exhaustive optimum") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 6 + rng() % 5;
    const std::size_t k = 2 + rng() % 2;
    const Matrix x = oracle::random_matrix(n, 2, rng);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = 0; s < 10; ++s) best = std::min(best, kmeans(x, k, s).inertia);
    CHECK(best <= 1.05 * optimum(x, k) + 1e-12);
  }
}

TEST_CASE("duplicate points keep every cluster populated") {
  Matrix x(8, 1, 0.0);
  x(7, 0) = 5.0;
  const auto cl = kmeans(x, 3, 0);
  CHECK(cl.assignment.size() == 8);
  for (double v : cl.centroids.data()) CHECK(std::isfinite(v));
}

TEST_CASE("cluster pseudo-labels") {
  Clustering cl;
  cl.centroids = Matrix(2, 1);
  cl.assignment = {0, 0, 1, 1};
  const auto pl = cluster_pseudo_labels(cl);
  CHECK(pl.labels == std::vector<int>{0, 0, 1, 1});
  CHECK(pl.num_classes == 2);
  Clustering one;
  one.centroids = Matrix(1, 1);
  one.assignment = {0, 0, 0};
  CHECK(cluster_pseudo_labels(one).labels == std::vector<int>{0, 0, 0});
}

TEST_CASE("permuting cluster ids with the head leaves the loss unchanged") {
  std::mt19937_64 rng(29);
  const Matrix x = oracle::random_matrix(30, 4, rng);
  const auto cl = kmeans(x, 3, 1);
  const auto pl = cluster_pseudo_labels(cl);
  LinearSoftmax m(4, 3);
  Rng r(1);
  m.initialize(r);
  const int perm[3] = {2, 0, 1};
  LinearSoftmax pm = m;
  auto p = m.parameters();
  auto q = pm.parameters();
  for (int k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < 4; ++j) q[perm[k] * 4 + j] = p[k * 4 + j];
    q[12 + perm[k]] = p[12 + k];
  }
  std::vector<std::size_t> idx(30);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> permuted(30);
  for (std::size_t i = 0; i < 30; ++i) permuted[i] = perm[pl.labels[i]];
  CHECK(mean_loss(m, x, idx, pl.labels) == doctest::Approx(mean_loss(pm, x, idx, permuted)).epsilon(1e-14));
}
