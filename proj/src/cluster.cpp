#include "lpal/cluster.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "lpal/error.hpp"
#include "lpal/random.hpp"

namespace lpal {

namespace {

Matrix seed_plus_plus(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centroids(k, x.cols());
  std::vector<char> taken(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto place = [&](std::size_t c, std::size_t i) {
    taken[i] = 1;
    auto src = x.row(i);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
    for (std::size_t j = 0; j < n; ++j)
      d2[j] = std::min(d2[j], kernels::squared_distance(x.row(j), src));
  };

  place(0, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick;
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      // every point coincides with a centroid; take a fresh one uniformly
      std::vector<std::size_t> free;
      for (std::size_t j = 0; j < n; ++j)
        if (!taken[j]) free.push_back(j);
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    place(c, pick);
  }
  return centroids;
}

}  // namespace

Clustering kmeans(const Matrix& input, std::size_t k, std::uint64_t seed, const KmeansOptions& opts) {
  const std::size_t n = input.rows();
  if (k == 0) throw InvalidArgument("kmeans: k must be positive");
  if (k > n) throw InvalidArgument("kmeans: k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  const Matrix x = opts.normalize ? kernels::normalize_rows(input, opts.exec) : input;
  const std::size_t d = x.cols();

  auto rng = make_rng(seed, kStreamKmeans);
  Clustering cl;
  cl.centroids = seed_plus_plus(x, k, rng);
  cl.assignment.assign(n, -1);
  std::vector<int> next(n);
  std::vector<double> dist2(n);

  for (int iter = 0; iter < std::max(opts.max_iter, 1); ++iter) {
    kernels::assign_nearest(x, cl.centroids, next, dist2, opts.exec);
    const bool changed = next != cl.assignment;
    cl.assignment = next;
    cl.iterations = iter + 1;

    // update step, serial for a fixed summation order
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(cl.assignment[i]);
      ++counts[c];
      auto row = x.row(i);
      auto s = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
    }
    bool reseeded = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto s = sums.row(c);
      auto cen = cl.centroids.row(c);
      for (std::size_t j = 0; j < d; ++j) cen[j] = s[j] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // farthest point from its (updated) centroid; ties to the lowest index
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(cl.assignment[i]);
        if (counts[own] <= 1) continue;
        const double dd = kernels::squared_distance(x.row(i), cl.centroids.row(own));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      const auto from = static_cast<std::size_t>(cl.assignment[far]);
      auto src = x.row(far);
      std::copy(src.begin(), src.end(), cl.centroids.row(c).begin());
      --counts[from];
      counts[c] = 1;
      cl.assignment[far] = static_cast<int>(c);
      reseeded = true;
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += kernels::squared_distance(x.row(i), cl.centroids.row(static_cast<std::size_t>(cl.assignment[i])));
    cl.inertia = inertia;
    cl.inertia_history.push_back(inertia);
    if (!changed && !reseeded) break;
  }
  return cl;
}

ClusterLabels cluster_pseudo_labels(const Clustering& cl) {
  return {cl.assignment, cl.centroids.rows()};
}

}  // namespace lpal
