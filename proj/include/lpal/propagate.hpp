#pragma once

#include <span>
#include <vector>

#include "lpal/dataset.hpp"
#include "lpal/graph.hpp"
#include "lpal/kernels.hpp"
#include "lpal/matrix.hpp"

namespace lpal {

struct CgOptions {
  double tol = 1e-8;
  // 0 selects 10 * sqrt(n) + 100.
  int max_iter = 0;
  // Execution of the sparse products inside one solve.
  Exec exec = Exec::serial;
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
};

int default_cg_iterations(std::size_t n);

// n x c zero-one matrix with a one at (i, y_i) for every labeled i.
Matrix one_hot(std::span<const std::size_t> labeled, std::span<const int> labels, std::size_t n,
               std::size_t c);

// Solves (I - alpha * W_norm) x = (1 - alpha) * y by conjugate gradient.
std::vector<double> solve_column(const SparseGraph& g, std::span<const double> y, double alpha,
                                 const CgOptions& opts = {}, CgReport* report = nullptr);

// h(Y) = (1 - alpha) (I - alpha W_norm)^-1 Y, one independent CG solve per column.
// Columns are distributed across threads when `parallel_columns` is set.
Matrix solve_propagation(const SparseGraph& g, const Matrix& y, double alpha,
                         const CgOptions& opts = {}, bool parallel_columns = true);

// argmax with ties to the lowest class id.
int prediction(std::span<const double> p);

// Shannon entropy in nats of p / sum(p), with 0 log 0 = 0.
double entropy(std::span<const double> p);

// 1 - H(p) / log c.
double certainty_weight(std::span<const double> p, std::size_t c);

struct Propagation {
  Matrix scores;              // h(Y), n x c, nonnegative
  Matrix probs;               // row-normalized scores where defined
  std::vector<char> defined;  // row sum of scores > 0
  std::vector<int> pseudo_labels;  // over U; kNoLabel on labeled rows
  std::vector<double> weights;     // over U in [0, 1]; 0 on labeled rows
  std::vector<std::size_t> unlabeled;
  double alpha = 0.0;
};

// Propagates the labels of `state` and derives pseudo-labels and certainty
// weights for every unlabeled node. Rows with zero score mass get weight 0 and
// the majority class of the labeled set.
Propagation pseudo_label_all(const SparseGraph& g, const LabelState& state, std::size_t c,
                             double alpha, const CgOptions& opts = {});

}  // namespace lpal
