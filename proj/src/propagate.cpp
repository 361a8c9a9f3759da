#include "lpal/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "lpal/error.hpp"

namespace lpal {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y = (I - alpha W) x
void apply_system(const SparseGraph& g, double alpha, std::span<const double> x,
                  std::span<double> y, Exec exec) {
  kernels::spmv(g.normalized, x, y, exec);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - alpha * y[i];
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in [0, 1)");
}

}  // namespace

int default_cg_iterations(std::size_t n) {
  return static_cast<int>(10.0 * std::sqrt(static_cast<double>(n))) + 100;
}

Matrix one_hot(std::span<const std::size_t> labeled, std::span<const int> labels, std::size_t n,
               std::size_t c) {
  if (labeled.size() != labels.size()) throw InvalidArgument("one_hot: size mismatch");
  Matrix y(n, c);
  for (std::size_t t = 0; t < labeled.size(); ++t) {
    if (labeled[t] >= n) throw InvalidArgument("one_hot: index out of range");
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= c)
      throw InvalidArgument("one_hot: label " + std::to_string(labels[t]) + " >= c = " + std::to_string(c));
    y(labeled[t], static_cast<std::size_t>(labels[t])) = 1.0;
  }
  return y;
}

std::vector<double> solve_column(const SparseGraph& g, std::span<const double> y, double alpha,
                                 const CgOptions& opts, CgReport* report) {
  check_alpha(alpha);
  const std::size_t n = g.size();
  if (y.size() != n) throw InvalidArgument("solve_column: rhs length != node count");
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : default_cg_iterations(n);

  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] < 0.0) throw InvalidArgument("solve_column: negative right-hand side");
    b[i] = (1.0 - alpha) * y[i];
  }
  std::vector<double> x(n, 0.0);
  const double b_norm = std::sqrt(dot(b, b));
  if (report) *report = {};
  if (b_norm == 0.0) return x;
  const double target = opts.tol * b_norm;

  std::vector<double> r = b, p = b, q(n);
  double rr = dot(r, r);
  int it = 0;
  while (true) {
    while (std::sqrt(rr) > target && it < max_iter) {
      ++it;
      apply_system(g, alpha, p, q, opts.exec);
      const double step = rr / dot(p, q);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += step * p[i];
        r[i] -= step * q[i];
      }
      const double rr_next = dot(r, r);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    // the recurrence drifts; confirm against the true residual and restart if needed
    apply_system(g, alpha, x, q, opts.exec);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    rr = dot(r, r);
    if (std::sqrt(rr) <= target) break;
    if (it >= max_iter) {
      std::ostringstream msg;
      msg << "conjugate gradient did not converge in " << max_iter
          << " iterations (relative residual " << std::sqrt(rr) / b_norm << ")";
      throw ConvergenceError(msg.str(), std::sqrt(rr) / b_norm, it);
    }
    p = r;
  }
  if (report) *report = {it, std::sqrt(rr) / b_norm};
  return x;
}

Matrix solve_propagation(const SparseGraph& g, const Matrix& y, double alpha,
                         const CgOptions& opts, bool parallel_columns) {
  check_alpha(alpha);
  if (y.rows() != g.size()) throw InvalidArgument("solve_propagation: Y rows != node count");
  const auto c = static_cast<std::ptrdiff_t>(y.cols());
  Matrix out(y.rows(), y.cols());
  std::vector<std::exception_ptr> errors(y.cols());
#pragma omp parallel for schedule(dynamic) if (parallel_columns)
  for (std::ptrdiff_t k = 0; k < c; ++k) {
    try {
      const auto col = y.column(static_cast<std::size_t>(k));
      out.set_column(static_cast<std::size_t>(k), solve_column(g, col, alpha, opts));
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

int prediction(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("prediction: empty probability vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return static_cast<int>(best);
}

double entropy(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("entropy: empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) throw InvalidArgument("entropy: negative or non-finite entry");
    sum += v;
  }
  if (sum <= 0.0) throw InvalidArgument("entropy: zero probability mass");
  double h = 0.0;
  for (double v : p) {
    const double q = v / sum;
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(p.size())));
}

double certainty_weight(std::span<const double> p, std::size_t c) {
  if (c < 2) throw InvalidArgument("certainty_weight: needs at least two classes");
  return std::clamp(1.0 - entropy(p) / std::log(static_cast<double>(c)), 0.0, 1.0);
}

Propagation pseudo_label_all(const SparseGraph& g, const LabelState& state, std::size_t c,
                             double alpha, const CgOptions& opts) {
  if (state.labeled().empty()) throw InvalidArgument("pseudo_label_all: no labeled examples");
  if (state.size() != g.size()) throw InvalidArgument("pseudo_label_all: state/graph size mismatch");
  const std::size_t n = g.size();
  const auto labels = state.labels();

  Propagation out;
  out.alpha = alpha;
  out.scores = solve_propagation(g, one_hot(state.labeled(), labels, n, c), alpha, opts);
  out.probs = Matrix(n, c);
  out.defined.assign(n, 0);
  out.pseudo_labels.assign(n, kNoLabel);
  out.weights.assign(n, 0.0);
  out.unlabeled = state.unlabeled();

  std::vector<std::size_t> counts(c, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());

  for (std::size_t i = 0; i < n; ++i) {
    auto s = out.scores.row(i);
    double sum = 0.0;
    for (double& v : s) {
      v = std::max(v, 0.0);  // CG round-off can leave tiny negatives
      sum += v;
    }
    if (sum > 0.0) {
      out.defined[i] = 1;
      auto p = out.probs.row(i);
      for (std::size_t k = 0; k < c; ++k) p[k] = s[k] / sum;
    }
  }
  for (auto i : out.unlabeled) {
    if (out.defined[i]) {
      const auto p = out.probs.row(i);
      out.pseudo_labels[i] = prediction(p);
      out.weights[i] = c >= 2 ? certainty_weight(p, c) : 1.0;
    } else {
      out.pseudo_labels[i] = majority;
      out.weights[i] = 0.0;
    }
  }
  return out;
}

}  // namespace lpal
