#pragma once

#include <cstdint>
#include <vector>

#include "lpal/kernels.hpp"
#include "lpal/matrix.hpp"

namespace lpal {

struct Clustering {
  Matrix centroids;             // k x d
  std::vector<int> assignment;  // length n, each < k
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each Lloyd iteration
  int iterations = 0;
};

struct KmeansOptions {
  int max_iter = 100;
  bool normalize = false;  // l2-normalize rows before clustering
  Exec exec = Exec::parallel;
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing. An empty cluster is moved onto the point farthest from its own
// centroid.
Clustering kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                  const KmeansOptions& opts = {});

struct ClusterLabels {
  std::vector<int> labels;
  std::size_t num_classes = 0;
};

ClusterLabels cluster_pseudo_labels(const Clustering& cl);

}  // namespace lpal
