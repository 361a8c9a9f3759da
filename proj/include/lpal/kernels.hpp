#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP variant selected by Exec; both produce bitwise-identical output
// because each output element is computed by exactly one thread with the
// same summation order.

#include <cstdint>
#include <span>
#include <vector>

#include "lpal/csr.hpp"
#include "lpal/matrix.hpp"

namespace lpal {

enum class Exec { serial, parallel };

namespace kernels {

// l2-normalize every row. Zero rows stay zero.
Matrix normalize_rows(const Matrix& in, Exec exec);

// For every row i of a row-normalized matrix, the k indices j != i with the
// largest dot(unit_i, unit_j), ordered by descending dot then ascending j.
std::vector<std::vector<std::uint32_t>> top_k_neighbors(const Matrix& unit, std::size_t k,
                                                        Exec exec);

// y = A x
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y, Exec exec);

double squared_distance(std::span<const double> a, std::span<const double> b);

// Nearest centroid by squared Euclidean distance, ties to the lowest id.
void assign_nearest(const Matrix& points, const Matrix& centroids, std::span<int> assignment,
                    std::span<double> dist2, Exec exec);

// min_dist2[t] = min(min_dist2[t], |points[candidates[t]] - q|^2)
void relax_min_distance(const Matrix& points, std::span<const std::size_t> candidates,
                        std::span<const double> q, std::span<double> min_dist2, Exec exec);

}  // namespace kernels
}  // namespace lpal
