#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>
#include <set>

#include "lpal/acquire.hpp"
#include "lpal/error.hpp"
#include "lpal/synthetic.hpp"
#include "oracles.hpp"

using namespace lpal;

namespace {

struct Fixture {
  Matrix probs, emb;
  SparseGraph graph;
  LabelState state;

  AcquisitionContext ctx(std::uint64_t seed = 0) const {
    AcquisitionContext c;
    c.probs = &probs;
    c.embeddings = &emb;
    c.graph = graph.size() ? &graph : nullptr;
    c.state = &state;
    c.seed = seed;
    return c;
  }
};

Matrix random_probs(std::size_t n, std::size_t c, std::mt19937_64& rng) {
  Matrix p = oracle::random_matrix(n, c, rng, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (double v : p.row(i)) s += v;
    for (double& v : p.row(i)) v /= s;
  }
  return p;
}

Fixture random_fixture(std::size_t n, std::size_t labeled, std::mt19937_64& rng) {
  Fixture f;
  f.probs = random_probs(n, 3, rng);
  f.emb = oracle::random_matrix(n, 4, rng);
  f.graph = build_reciprocal_knn(f.emb, 6);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(labeled);
  std::vector<int> y(labeled);
  for (std::size_t t = 0; t < labeled; ++t) y[t] = static_cast<int>(t % 3);
  f.state = LabelState(n, idx, y);
  return f;
}

}  // namespace

TEST_CASE("strategy names") {
  for (auto k : {StrategyKind::random, StrategyKind::uncertainty, StrategyKind::coreset, StrategyKind::ceal,
                 StrategyKind::jlp})
    CHECK(parse_strategy(strategy_name(k)) == k);
  CHECK_THROWS_AS(parse_strategy("bogus"), ConfigError);
}

TEST_CASE("uncertainty picks the mixed row") {
  Fixture f;
  f.probs = Matrix(3, 2, std::vector<double>{1, 0, 0.9, 0.1, 0.5, 0.5});
  f.emb = Matrix(3, 1);
  f.state = LabelState(3, std::vector<std::size_t>{0}, std::vector<int>{0});
  Strategy s;
  const auto a = acquire_batch(f.ctx(), s, 1);
  CHECK(a.indices == std::vector<std::size_t>{2});
  const auto sc = score_uncertainty(f.ctx());
  CHECK(sc[1] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("uncertainty ranking equals a full sort") {
  std::mt19937_64 rng(3);
  auto f = random_fixture(100, 0, rng);
  f.state = LabelState(100, {}, {});
  const auto sc = score_uncertainty(f.ctx());
  std::vector<std::size_t> order(100);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sc[a] > sc[b]; });
  const auto a = select_uncertainty(f.ctx(), 100);
  CHECK(a.indices == order);
  for (std::size_t i = 0; i < 100; ++i) {
    std::vector<double> p(f.probs.row(i).begin(), f.probs.row(i).end());
    CHECK(sc[i] == doctest::Approx(entropy(p)));
  }
  // Scaling rows leaves the ranking unchanged.
  for (std::size_t i = 0; i < 100; ++i)
    for (double& v : f.probs.row(i)) v *= 1.0 + static_cast<double>(i);
  CHECK(select_uncertainty(f.ctx(), 100).indices == order);
}

TEST_CASE("batch size limits") {
  std::mt19937_64 rng(4);
  const auto f = random_fixture(30, 5, rng);
  for (auto k : {StrategyKind::random, StrategyKind::uncertainty, StrategyKind::coreset, StrategyKind::ceal,
                 StrategyKind::jlp}) {
    Strategy s;
    s.kind = k;
    CHECK(acquire_batch(f.ctx(), s, 0).indices.empty());
    const auto all = acquire_batch(f.ctx(), s, 25);
    CHECK(std::set<std::size_t>(all.indices.begin(), all.indices.end()) ==
          std::set<std::size_t>(f.state.unlabeled().begin(), f.state.unlabeled().end()));
    CHECK_THROWS_AS(acquire_batch(f.ctx(), s, 26), InvalidArgument);
  }
}

TEST_CASE("all strategies return distinct unlabeled indices") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_fixture(80, 10, rng);
    for (auto k : {StrategyKind::random, StrategyKind::uncertainty, StrategyKind::coreset, StrategyKind::ceal,
                   StrategyKind::jlp}) {
      Strategy s;
      s.kind = k;
      const auto a = acquire_batch(f.ctx(trial), s, 12);
      CHECK(a.indices.size() == 12);
      CHECK(std::set<std::size_t>(a.indices.begin(), a.indices.end()).size() == 12);
      for (auto i : a.indices) CHECK_FALSE(f.state.is_labeled(i));
    }
  }
}

TEST_CASE("coreset on the 1-D fixture") {
  Fixture f;
  f.emb = Matrix(4, 1, std::vector<double>{0, 1, 2, 10});
  f.probs = Matrix(4, 2, 0.5);
  f.state = LabelState(4, std::vector<std::size_t>{0}, std::vector<int>{0});
  const auto a = select_coreset(f.ctx(), 2);
  CHECK(a.indices == std::vector<std::size_t>{3, 2});
  CHECK(a.scores[0] == doctest::Approx(10.0));
  CHECK(a.scores[1] == doctest::Approx(2.0));
  CHECK(select_coreset(f.ctx(), 1).indices == std::vector<std::size_t>{3});
}

TEST_CASE("coincident points are taken in ascending order") {
  Fixture f;
  f.emb = Matrix(6, 2, 1.0);
  f.probs = Matrix(6, 2, 0.5);
  f.state = LabelState(6, std::vector<std::size_t>{2}, std::vector<int>{0});
  CHECK(select_coreset(f.ctx(), 3).indices == std::vector<std::size_t>{0, 1, 3});
}

TEST_CASE("coreset equals the brute-force greedy oracle") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 20 + rng() % 180;
    const std::size_t b = 1 + rng() % 20;
    const auto f = random_fixture(n, 1 + rng() % 10, rng);
    const auto a = select_coreset(f.ctx(), b);
    CHECK(a.indices == oracle::coreset(f.emb, f.state.labeled(), f.state.unlabeled(), b));
    AcquisitionContext serial = f.ctx();
    serial.exec = Exec::serial;
    CHECK(select_coreset(serial, b).indices == a.indices);
  }
}

TEST_CASE("cosine coreset normalizes first") {
  Fixture f;
  f.emb = Matrix(4, 2, std::vector<double>{1, 0, 10, 0.5, 0, 1, 0.1, 0.1});
  f.probs = Matrix(4, 2, 0.5);
  f.state = LabelState(4, std::vector<std::size_t>{0}, std::vector<int>{0});
  CHECK(select_coreset(f.ctx(), 1, Metric::euclidean).indices == std::vector<std::size_t>{1});
  CHECK(select_coreset(f.ctx(), 1, Metric::cosine).indices == std::vector<std::size_t>{2});
}

TEST_CASE("ceal") {
  Fixture f;
  f.probs = Matrix(5, 2, std::vector<double>{1, 0, 1, 0, 0.5, 0.5, 0.99, 0.01, 0.2, 0.8});
  f.emb = Matrix(5, 1);
  f.state = LabelState(5, std::vector<std::size_t>{0}, std::vector<int>{0});
  const auto a = select_ceal(f.ctx(), 1, 0.1);
  CHECK(a.indices == std::vector<std::size_t>{2});
  CHECK(a.pseudo == std::vector<std::pair<std::size_t, int>>{{1, 0}, {3, 0}});
  CHECK(select_ceal(f.ctx(), 1, 0.0).pseudo == std::vector<std::pair<std::size_t, int>>{{1, 0}});
  CHECK(select_ceal(f.ctx(), 1, std::log(2.0)).pseudo.size() == 3);
  CHECK_THROWS_AS(select_ceal(f.ctx(), 1, -1.0), InvalidArgument);
}

TEST_CASE("ceal with strictly mixed rows") {
  std::mt19937_64 rng(8);
  const auto f = random_fixture(40, 4, rng);
  CHECK(select_ceal(f.ctx(), 3, 0.0).pseudo.empty());
  CHECK(select_ceal(f.ctx(), 3, std::log(3.0)).pseudo.size() == 33);
}

TEST_CASE("jlp on the chain picks the far end") {
  Fixture f;
  f.graph = make_graph(chain_graph());
  f.probs = Matrix(3, 2, 0.5);
  f.emb = Matrix(3, 1);
  f.state = LabelState(3, std::vector<std::size_t>{0}, std::vector<int>{0});
  const auto a = select_jlp(f.ctx(), 1, 0.5);
  CHECK(a.indices == std::vector<std::size_t>{2});
  CHECK(a.scores[0] == doctest::Approx(0.08333).epsilon(1e-4));
}

TEST_CASE("jlp takes disconnected nodes first") {
  const std::vector<Edge> edges{{0, 1, 1.0}, {1, 2, 1.0}, {3, 4, 1.0}};
  Fixture f;
  f.graph = make_graph(csr_from_edges(5, edges));
  f.probs = Matrix(5, 2, 0.5);
  f.emb = Matrix(5, 1);
  f.state = LabelState(5, std::vector<std::size_t>{0}, std::vector<int>{0});
  const auto a = select_jlp(f.ctx(), 1, 0.9);
  CHECK(a.indices == std::vector<std::size_t>{3});
  CHECK(a.scores[0] == 0.0);
}

TEST_CASE("jlp picks the deeper leaf of two branches") {
  // 0 is labeled; branch A: 0-1-2, branch B: 0-3-4-5.
  const std::vector<Edge> edges{{0, 1, 1.0}, {1, 2, 1.0}, {0, 3, 1.0}, {3, 4, 1.0}, {4, 5, 1.0}};
  Fixture f;
  f.graph = make_graph(csr_from_edges(6, edges));
  f.probs = Matrix(6, 2, 0.5);
  f.emb = Matrix(6, 1);
  f.state = LabelState(6, std::vector<std::size_t>{0}, std::vector<int>{0});
  const auto a = select_jlp(f.ctx(), 1, 0.5);
  CHECK(a.indices == std::vector<std::size_t>{5});
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 1);
  d(0, 0) = 1.0;
  const auto h = oracle::propagate(oracle::dense(f.graph.normalized), d, 0.5);
  Eigen::Index arg;
  h.col(0).tail(5).minCoeff(&arg);
  CHECK(static_cast<std::size_t>(arg + 1) == a.indices[0]);
}

TEST_CASE("jlp with tiny alpha returns ascending indices") {
  std::mt19937_64 rng(10);
  const auto f = random_fixture(50, 5, rng);
  const auto a = select_jlp(f.ctx(), 5, 1e-300);
  std::vector<std::size_t> first(f.state.unlabeled().begin(), f.state.unlabeled().begin() + 5);
  CHECK(a.indices == first);
}

TEST_CASE("jlp greedy matches dense solves") {
  std::mt19937_64 rng(12);
  const auto f = random_fixture(60, 3, rng);
  const auto a = select_jlp(f.ctx(), 4, 0.9);
  std::vector<std::size_t> set = f.state.labeled();
  const auto wn = oracle::dense(f.graph.normalized);
  for (auto pick : a.indices) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(60, 1);
    for (auto i : set) d(static_cast<Eigen::Index>(i), 0) = 1.0;
    const auto h = oracle::propagate(wn, d, 0.9);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < 60; ++i) {
      if (std::find(set.begin(), set.end(), i) != set.end()) continue;
      if (h(static_cast<Eigen::Index>(i), 0) < best - 1e-9) {
        best = h(static_cast<Eigen::Index>(i), 0);
        arg = i;
      }
    }
    CHECK(pick == arg);
    set.push_back(pick);
  }
}

TEST_CASE("random strategy is reproducible and uniform") {
  std::mt19937_64 rng(13);
  const auto f = random_fixture(60, 10, rng);
  CHECK(select_random(f.ctx(7), 5).indices == select_random(f.ctx(7), 5).indices);
  std::vector<double> count(60, 0.0);
  const int runs = 4000;
  for (int s = 0; s < runs; ++s)
    for (auto i : select_random(f.ctx(s), 5).indices) count[i] += 1;
  const double e = runs * 5.0 / 50.0;
  double chi = 0;
  for (auto i : f.state.unlabeled()) chi += (count[i] - e) * (count[i] - e) / e;
  const boost::math::chi_squared dist(49);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi)) > 0.001);
}
