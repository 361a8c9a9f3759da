#include "lpal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "lpal/error.hpp"

namespace lpal {

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[r]);
  auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[r + 1]);
  auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return val[static_cast<std::size_t>(it - col.begin())];
}

bool CsrMatrix::is_symmetric() const {
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      if (at(col[e], r) != val[e]) return false;
      // presence check: at() returns 0 for missing, so an explicit zero would pass
      auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[col[e]]);
      auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[col[e] + 1]);
      if (!std::binary_search(first, last, static_cast<std::uint32_t>(r))) return false;
    }
  }
  return true;
}

namespace kernels {
namespace {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize_row(std::span<const double> in, std::span<double> out) {
  const double norm = std::sqrt(dot(in, in));
  if (norm == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] / norm;
}

using Scored = std::pair<double, std::uint32_t>;

inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.first != b.first) return a.first > b.first;
  return a.second < b.second;
}

std::vector<std::uint32_t> row_top_k(const Matrix& unit, std::size_t i, std::size_t k,
                                     std::vector<Scored>& buf) {
  const std::size_t n = unit.rows();
  buf.clear();
  const auto ui = unit.row(i);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    buf.emplace_back(dot(ui, unit.row(j)), static_cast<std::uint32_t>(j));
  }
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(k);
  std::partial_sort(buf.begin(), mid, buf.end(), ranks_before);
  std::vector<std::uint32_t> out(k);
  for (std::size_t t = 0; t < k; ++t) out[t] = buf[t].second;
  return out;
}

inline double row_times(const CsrMatrix& a, std::size_t r, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t e = a.row_ptr[r]; e < a.row_ptr[r + 1]; ++e) s += a.val[e] * x[a.col[e]];
  return s;
}

inline std::pair<int, double> nearest(std::span<const double> p, const Matrix& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return {best, best_d};
}

namespace serial {

Matrix normalize_rows(const Matrix& in) {
  Matrix out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.rows(); ++i) normalize_row(in.row(i), out.row(i));
  return out;
}

std::vector<std::vector<std::uint32_t>> top_k_neighbors(const Matrix& unit, std::size_t k) {
  std::vector<std::vector<std::uint32_t>> out(unit.rows());
  std::vector<Scored> buf;
  for (std::size_t i = 0; i < unit.rows(); ++i) out[i] = row_top_k(unit, i, k, buf);
  return out;
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.n; ++r) y[r] = row_times(a, r, x);
}

void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> assignment,
                    std::span<double> dist2) {
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto [c, d] = nearest(points.row(i), centroids);
    assignment[i] = c;
    dist2[i] = d;
  }
}

void relax_min_distance(const Matrix& points, std::span<const std::size_t> candidates,
                        std::span<const double> q, std::span<double> min_dist2) {
  for (std::size_t t = 0; t < candidates.size(); ++t)
    min_dist2[t] = std::min(min_dist2[t], squared_distance(points.row(candidates[t]), q));
}

}  // namespace serial

namespace omp {

Matrix normalize_rows(const Matrix& in) {
  Matrix out(in.rows(), in.cols());
  const auto n = static_cast<std::ptrdiff_t>(in.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) normalize_row(in.row(i), out.row(i));
  return out;
}

std::vector<std::vector<std::uint32_t>> top_k_neighbors(const Matrix& unit, std::size_t k) {
  std::vector<std::vector<std::uint32_t>> out(unit.rows());
  const auto n = static_cast<std::ptrdiff_t>(unit.rows());
#pragma omp parallel
  {
    std::vector<Scored> buf;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      out[i] = row_top_k(unit, static_cast<std::size_t>(i), k, buf);
  }
  return out;
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::ptrdiff_t>(a.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) y[r] = row_times(a, static_cast<std::size_t>(r), x);
}

void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> assignment,
                    std::span<double> dist2) {
  const auto n = static_cast<std::ptrdiff_t>(points.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto [c, d] = nearest(points.row(i), centroids);
    assignment[i] = c;
    dist2[i] = d;
  }
}

void relax_min_distance(const Matrix& points, std::span<const std::size_t> candidates,
                        std::span<const double> q, std::span<double> min_dist2) {
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t)
    min_dist2[t] = std::min(min_dist2[t], squared_distance(points.row(candidates[t]), q));
}

}  // namespace omp
}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Matrix normalize_rows(const Matrix& in, Exec exec) {
  return exec == Exec::parallel ? omp::normalize_rows(in) : serial::normalize_rows(in);
}

std::vector<std::vector<std::uint32_t>> top_k_neighbors(const Matrix& unit, std::size_t k,
                                                        Exec exec) {
  if (k >= unit.rows()) throw InvalidArgument("top_k_neighbors: k must be < number of rows");
  return exec == Exec::parallel ? omp::top_k_neighbors(unit, k)
                                : serial::top_k_neighbors(unit, k);
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y, Exec exec) {
  if (exec == Exec::parallel)
    omp::spmv(a, x, y);
  else
    serial::spmv(a, x, y);
}

void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> assignment,
                    std::span<double> dist2, Exec exec) {
  if (exec == Exec::parallel)
    omp::assign_nearest(points, centroids, assignment, dist2);
  else
    serial::assign_nearest(points, centroids, assignment, dist2);
}

void relax_min_distance(const Matrix& points, std::span<const std::size_t> candidates,
                        std::span<const double> q, std::span<double> min_dist2, Exec exec) {
  if (exec == Exec::parallel)
    omp::relax_min_distance(points, candidates, q, min_dist2);
  else
    serial::relax_min_distance(points, candidates, q, min_dist2);
}

}  // namespace kernels
}  // namespace lpal
