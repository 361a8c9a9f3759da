#include <doctest.h>

#include <random>

#include "lpal/error.hpp"
#include "lpal/propagate.hpp"
#include "lpal/synthetic.hpp"
#include "oracles.hpp"

using namespace lpal;

namespace {

SparseGraph chain() { return make_graph(chain_graph()); }

LabelState state_with(std::size_t n, std::vector<std::size_t> idx, std::vector<int> y) {
  return LabelState(n, idx, y);
}

}  // namespace

TEST_CASE("one_hot") {
  const std::vector<std::size_t> l{0};
  const std::vector<int> y{1};
  const Matrix m = one_hot(l, y, 2, 2);
  CHECK(m == Matrix(2, 2, std::vector<double>{0, 1, 0, 0}));
  CHECK(one_hot({}, {}, 3, 2) == Matrix(3, 2));
  const std::vector<std::size_t> all{0, 1, 2};
  const std::vector<int> perm{2, 0, 1};
  CHECK(one_hot(all, perm, 3, 3) == Matrix(3, 3, std::vector<double>{0, 0, 1, 1, 0, 0, 0, 1, 0}));
  const std::vector<int> bad{2};
  CHECK_THROWS_AS(one_hot(l, bad, 2, 2), InvalidArgument);
}

TEST_CASE("chain propagation") {
  const auto g = chain();
  Matrix y(3, 1);
  y(0, 0) = 1.0;
  const Matrix h = solve_propagation(g, y, 0.5);
  CHECK(h(0, 0) == doctest::Approx(0.58333).epsilon(1e-4));
  CHECK(h(1, 0) == doctest::Approx(0.23570).epsilon(1e-4));
  CHECK(h(2, 0) == doctest::Approx(0.08333).epsilon(1e-4));
  const auto dense = oracle::propagate(oracle::dense(g.normalized), oracle::to_eigen(y), 0.5);
  for (int i = 0; i < 3; ++i) CHECK(h(i, 0) == doctest::Approx(dense(i, 0)).epsilon(1e-9));
}

TEST_CASE("alpha zero and zero labels") {
  const auto g = chain();
  Matrix y(3, 2);
  y(0, 0) = 1.0;
  y(2, 1) = 1.0;
  CHECK(solve_propagation(g, y, 0.0) == y);
  CHECK(solve_propagation(g, Matrix(3, 2), 0.9) == Matrix(3, 2));
}

TEST_CASE("solve preconditions") {
  const auto g = chain();
  Matrix y(3, 1);
  y(0, 0) = 1.0;
  CHECK_THROWS_AS(solve_propagation(g, y, 1.0), InvalidArgument);
  CHECK_THROWS_AS(solve_propagation(g, y, -0.1), InvalidArgument);
  y(1, 0) = -1.0;
  CHECK_THROWS_AS(solve_propagation(g, y, 0.5), InvalidArgument);
}

TEST_CASE("non-convergence reports the residual") {
  std::mt19937_64 rng(1);
  const Matrix x = oracle::random_matrix(200, 4, rng);
  const auto g = build_reciprocal_knn(x, 10);
  std::vector<double> y(200, 0.0);
  y[0] = 1.0;
  CgOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-14;
  try {
    solve_column(g, y, 0.99, opts);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 1e-14);
    CHECK(e.iterations() >= 1);
  }
}

TEST_CASE("CG equals dense solve on random graphs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 20 + rng() % 150;
    const std::size_t c = 2 + rng() % 8;
    const Matrix x = oracle::random_matrix(n, 5, rng);
    const auto g = build_reciprocal_knn(x, 3 + rng() % 10);
    Matrix y(n, c);
    for (std::size_t i = 0; i < n; i += 7) y(i, rng() % c) = 1.0;
    for (double alpha : {0.5, 0.9, 0.99}) {
      const auto h = oracle::to_eigen(solve_propagation(g, y, alpha));
      const auto d = oracle::propagate(oracle::dense(g.normalized), oracle::to_eigen(y), alpha);
      for (Eigen::Index k = 0; k < d.cols(); ++k) {
        const double nrm = d.col(k).norm();
        if (nrm == 0.0)
          CHECK(h.col(k).norm() == 0.0);
        else
          CHECK((h.col(k) - d.col(k)).norm() / nrm < 1e-6);
      }
    }
  }
}

TEST_CASE("column-parallel and serial solves agree") {
  std::mt19937_64 rng(4);
  const Matrix x = oracle::random_matrix(300, 6, rng);
  const auto g = build_reciprocal_knn(x, 10);
  Matrix y(300, 5);
  for (std::size_t i = 0; i < 300; i += 11) y(i, i % 5) = 1.0;
  CgOptions par;
  par.exec = Exec::parallel;
  const Matrix a = solve_propagation(g, y, 0.99, {}, false);
  CHECK(solve_propagation(g, y, 0.99, {}, true) == a);
  CHECK(solve_propagation(g, y, 0.99, par, true) == a);
}

TEST_CASE("scores are monotone in the labels") {
  std::mt19937_64 rng(8);
  const Matrix x = oracle::random_matrix(120, 4, rng);
  const auto g = build_reciprocal_knn(x, 8);
  Matrix y(120, 3);
  for (std::size_t i = 0; i < 120; i += 13) y(i, i % 3) = 1.0;
  CgOptions tight;
  tight.tol = 1e-12;
  const Matrix before = solve_propagation(g, y, 0.9, tight);
  y(5, 1) = 1.0;
  const Matrix after = solve_propagation(g, y, 0.9, tight);
  for (std::size_t i = 0; i < 120; ++i) CHECK(after(i, 1) >= before(i, 1) - 1e-10);
}

TEST_CASE("prediction") {
  CHECK(prediction(std::vector<double>{0.1, 0.7, 0.2}) == 1);
  CHECK(prediction(std::vector<double>{0.5, 0.5}) == 0);
  CHECK(prediction(std::vector<double>{0, 0, 1, 0}) == 2);
  CHECK_THROWS_AS(prediction(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("entropy and certainty weight") {
  for (std::size_t c : {2u, 3u, 10u}) {
    const std::vector<double> uni(c, 1.0 / static_cast<double>(c));
    std::vector<double> hot(c, 0.0);
    hot[c - 1] = 1.0;
    CHECK(std::abs(entropy(uni) - std::log(static_cast<double>(c))) < 1e-12);
    CHECK(std::abs(certainty_weight(uni, c)) < 1e-12);
    CHECK(entropy(hot) == 0.0);
    CHECK(certainty_weight(hot, c) == 1.0);
  }
  const std::vector<double> half{0.5, 0.5, 0, 0};
  CHECK(std::abs(entropy(half) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(certainty_weight(half, 4) - 0.5) < 1e-12);
  // Renormalized internally.
  CHECK(std::abs(entropy(std::vector<double>{2, 2}) - std::log(2.0)) < 1e-12);
  CHECK_THROWS_AS(entropy(std::vector<double>{0.5, -0.1}), InvalidArgument);
  CHECK_THROWS_AS(certainty_weight(std::vector<double>{1.0}, 1), InvalidArgument);
}

TEST_CASE("pseudo-labels on the chain with one labeled class") {
  const auto g = chain();
  const auto st = state_with(3, {0}, {0});
  const auto prop = pseudo_label_all(g, st, 2, 0.5);
  CHECK(prop.unlabeled == std::vector<std::size_t>{1, 2});
  for (auto i : prop.unlabeled) {
    CHECK(prop.pseudo_labels[i] == 0);
    CHECK(prop.weights[i] == doctest::Approx(1.0));
  }
  CHECK(prop.pseudo_labels[0] == kNoLabel);
  CHECK(prop.weights[0] == 0.0);
}

TEST_CASE("disconnected components inherit their own class") {
  const std::vector<Edge> edges{{0, 1, 1.0}, {1, 2, 0.5}, {3, 4, 1.0}, {4, 5, 2.0}};
  const auto g = make_graph(csr_from_edges(6, edges));
  const auto st = state_with(6, {0, 5}, {1, 0});
  const auto prop = pseudo_label_all(g, st, 2, 0.99);
  CHECK(prop.pseudo_labels[1] == 1);
  CHECK(prop.pseudo_labels[2] == 1);
  CHECK(prop.pseudo_labels[3] == 0);
  CHECK(prop.pseudo_labels[4] == 0);
  const auto d = oracle::propagate(oracle::dense(g.normalized), oracle::to_eigen(one_hot(st.labeled(), st.labels(), 6, 2)), 0.99);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index k = 0; k < 2; ++k) CHECK(prop.scores(i, k) == doctest::Approx(d(i, k)).epsilon(1e-6));
}

TEST_CASE("isolated unlabeled node gets weight zero and the majority class") {
  const std::vector<Edge> edges{{0, 1, 1.0}, {1, 2, 1.0}};
  const auto g = make_graph(csr_from_edges(4, edges));
  const auto st = state_with(4, {0, 2, 1}, {1, 0, 1});
  const auto prop = pseudo_label_all(g, st, 2, 0.9);
  CHECK(prop.weights[3] == 0.0);
  CHECK(prop.pseudo_labels[3] == 1);
  CHECK_FALSE(prop.defined[3]);
}

TEST_CASE("propagation invariants on random graphs") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 50 + rng() % 100;
    const std::size_t c = 2 + rng() % 5;
    const Matrix x = oracle::random_matrix(n, 4, rng);
    const auto g = build_reciprocal_knn(x, 6);
    std::vector<std::size_t> idx;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; i += 9) {
      idx.push_back(i);
      y.push_back(static_cast<int>(rng() % c));
    }
    const auto prop = pseudo_label_all(g, LabelState(n, idx, y), c, 0.99);
    for (auto i : prop.unlabeled) {
      CHECK(prop.weights[i] >= 0.0);
      CHECK(prop.weights[i] <= 1.0);
      double s = 0;
      for (std::size_t k = 0; k < c; ++k) {
        CHECK(prop.scores(i, k) >= 0.0);
        s += prop.probs(i, k);
      }
      if (prop.defined[i]) {
        CHECK(std::abs(s - 1.0) < 1e-9);
        CHECK(prediction(prop.probs.row(i)) == prediction(prop.scores.row(i)));
        CHECK(prop.weights[i] == doctest::Approx(certainty_weight(prop.probs.row(i), c)));
        CHECK(prop.pseudo_labels[i] == prediction(prop.probs.row(i)));
      }
    }
  }
}
