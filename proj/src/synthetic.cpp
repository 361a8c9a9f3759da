#include "lpal/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "lpal/error.hpp"
#include "lpal/graph.hpp"
#include "lpal/random.hpp"

namespace lpal {

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 4) throw InvalidArgument("two-moons needs n >= 4");
  if (!(noise >= 0.0)) throw InvalidArgument("noise must be >= 0");
  auto rng = make_rng(seed, kStreamGenerate);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const std::size_t per[2] = {(n + 1) / 2, n / 2};
  Matrix x(n, 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    const std::size_t j = i / 2;
    const double t = std::numbers::pi * static_cast<double>(j) / static_cast<double>(per[c] - 1);
    double px = std::cos(t), py = std::sin(t);
    if (c == 1) {
      px = 1.0 - px;
      py = 0.5 - py;
    }
    x(i, 0) = px + noise * jitter(rng);
    x(i, 1) = py + noise * jitter(rng);
    y[i] = c;
  }
  return Dataset(std::move(x), std::move(y), 2);
}

Dataset make_blobs(std::size_t n, std::size_t classes, std::size_t dim, double stddev, double box,
                   std::uint64_t seed) {
  if (classes == 0 || dim == 0) throw InvalidArgument("blobs need classes >= 1 and dim >= 1");
  if (n < 2 * classes) throw InvalidArgument("blobs need n >= 2 * classes");
  if (!(stddev >= 0.0) || !(box > 0.0)) throw InvalidArgument("blobs need stddev >= 0 and box > 0");
  auto rng = make_rng(seed, kStreamGenerate);
  std::uniform_real_distribution<double> center(-box, box);
  std::normal_distribution<double> jitter(0.0, 1.0);
  Matrix centers(classes, dim);
  for (double& v : centers.data()) v = center(rng);
  Matrix x(n, dim);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % classes;
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = centers(c, j) + stddev * jitter(rng);
    y[i] = static_cast<int>(c);
  }
  return Dataset(std::move(x), std::move(y), classes);
}

Dataset make_chain() {
  Matrix x(3, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 1.0;
  x(2, 0) = 2.0;
  return Dataset(std::move(x), {0, 1, 1}, 2);
}

CsrMatrix chain_graph() {
  const Edge edges[] = {{0, 1, 1.0}, {1, 2, 1.0}};
  return csr_from_edges(3, edges);
}

}  // namespace lpal
