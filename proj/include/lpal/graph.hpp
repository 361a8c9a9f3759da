#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lpal/csr.hpp"
#include "lpal/kernels.hpp"
#include "lpal/matrix.hpp"

namespace lpal {

// Affinity graph W together with its degrees and D^-1/2 W D^-1/2.
struct SparseGraph {
  CsrMatrix adjacency;
  std::vector<double> degrees;
  CsrMatrix normalized;

  std::size_t size() const noexcept { return adjacency.n; }
};

struct Edge {
  std::size_t i;
  std::size_t j;
  double weight;
};

// max(0, cos(u, v))^3. Throws on zero vectors or mismatched dimensions.
double similarity(std::span<const double> u, std::span<const double> v);

// Reciprocal k-nearest-neighbor graph under `similarity`. Rows with zero norm
// have no defined direction and become isolated nodes. Zero-weight edges are
// dropped. Throws when k >= n.
SparseGraph build_reciprocal_knn(const Matrix& features, std::size_t k,
                                 Exec exec = Exec::parallel);

// D^-1/2 W D^-1/2 with zero rows for isolated nodes. Throws on asymmetric input.
CsrMatrix normalize(const CsrMatrix& w);

// Validates W (square, symmetric, zero diagonal, nonnegative) and normalizes it.
SparseGraph make_graph(CsrMatrix w);

// Symmetric CSR from undirected edges; each edge is stored at (i,j) and (j,i).
CsrMatrix csr_from_edges(std::size_t n, std::span<const Edge> edges);

// `i j weight` lines for i < j, sorted by (i, j).
std::string format_edge_list(const CsrMatrix& w);
void write_edge_list(const std::filesystem::path& path, const CsrMatrix& w);
// Node count is the larger of `min_nodes` and 1 + the largest index present.
CsrMatrix read_edge_list(const std::filesystem::path& path, std::size_t min_nodes = 0);

}  // namespace lpal
