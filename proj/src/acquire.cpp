#include "lpal/acquire.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lpal/error.hpp"
#include "lpal/random.hpp"

namespace lpal {

StrategyKind parse_strategy(std::string_view name) {
  if (name == "random") return StrategyKind::random;
  if (name == "uncertainty") return StrategyKind::uncertainty;
  if (name == "coreset") return StrategyKind::coreset;
  if (name == "ceal") return StrategyKind::ceal;
  if (name == "jlp") return StrategyKind::jlp;
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected random, uncertainty, coreset, ceal or jlp)");
}

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::random: return "random";
    case StrategyKind::uncertainty: return "uncertainty";
    case StrategyKind::coreset: return "coreset";
    case StrategyKind::ceal: return "ceal";
    case StrategyKind::jlp: return "jlp";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "cosine") return Metric::cosine;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

namespace {

const LabelState& state_of(const AcquisitionContext& ctx) {
  if (!ctx.state) throw InvalidArgument("acquisition context has no label state");
  return *ctx.state;
}

void check_budget(const AcquisitionContext& ctx, std::size_t b) {
  const auto u = state_of(ctx).unlabeled().size();
  if (b > u)
    throw InvalidArgument("acquisition budget " + std::to_string(b) + " exceeds " +
                          std::to_string(u) + " unlabeled examples");
}

// Top-b positions of `scores` by descending score, ties by ascending position.
std::vector<std::size_t> top_positions(std::span<const double> scores, std::size_t b) {
  std::vector<std::size_t> pos(scores.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
  pos.resize(b);
  return pos;
}

Acquisition take_top(const AcquisitionContext& ctx, std::span<const double> scores, std::size_t b) {
  const auto& u = state_of(ctx).unlabeled();
  Acquisition out;
  for (auto p : top_positions(scores, b)) {
    out.indices.push_back(u[p]);
    out.scores.push_back(scores[p]);
  }
  return out;
}

std::vector<double> random_keys(const AcquisitionContext& ctx) {
  auto rng = make_rng(ctx.seed, kStreamAcquire);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> keys(state_of(ctx).unlabeled().size());
  for (double& k : keys) k = dist(rng);
  return keys;
}

const Matrix& points_for(const AcquisitionContext& ctx, Metric metric, Matrix& storage) {
  if (!ctx.embeddings) throw InvalidArgument("coreset needs embeddings");
  if (ctx.embeddings->rows() != state_of(ctx).size()) throw InvalidArgument("embeddings do not cover the pool");
  if (metric == Metric::euclidean) return *ctx.embeddings;
  // on unit vectors squared Euclidean distance is 2 - 2 cos, so the order matches cosine distance
  storage = kernels::normalize_rows(*ctx.embeddings, ctx.exec);
  return storage;
}

std::vector<double> min_distances_to_labeled(const Matrix& pts, const LabelState& state, Exec exec) {
  const auto& u = state.unlabeled();
  std::vector<double> d2(u.size(), std::numeric_limits<double>::infinity());
  for (auto l : state.labeled()) kernels::relax_min_distance(pts, u, pts.row(l), d2, exec);
  return d2;
}

std::vector<double> manifold_similarity(const AcquisitionContext& ctx, std::span<const char> in_query,
                                        double alpha, const CgOptions& cg) {
  if (!ctx.graph) throw InvalidArgument("jlp needs a graph");
  std::vector<double> delta(in_query.size());
  for (std::size_t i = 0; i < in_query.size(); ++i) delta[i] = in_query[i] ? 1.0 : 0.0;
  CgOptions opts = cg;
  opts.exec = ctx.exec;
  auto h = solve_column(*ctx.graph, delta, alpha, opts);
  for (double& v : h) v = std::max(v, 0.0);
  return h;
}

}  // namespace

std::vector<double> score_uncertainty(const AcquisitionContext& ctx) {
  const auto& state = state_of(ctx);
  if (!ctx.probs || ctx.probs->rows() != state.size()) throw InvalidArgument("uncertainty needs n x c probabilities");
  const auto& u = state.unlabeled();
  std::vector<double> h(u.size());
  const auto m = static_cast<std::ptrdiff_t>(u.size());
#pragma omp parallel for schedule(static) if (ctx.exec == Exec::parallel)
  for (std::ptrdiff_t t = 0; t < m; ++t) h[t] = entropy(ctx.probs->row(u[t]));
  return h;
}

Acquisition select_random(const AcquisitionContext& ctx, std::size_t b) {
  check_budget(ctx, b);
  return take_top(ctx, random_keys(ctx), b);
}

Acquisition select_uncertainty(const AcquisitionContext& ctx, std::size_t b) {
  check_budget(ctx, b);
  return take_top(ctx, score_uncertainty(ctx), b);
}

Acquisition select_coreset(const AcquisitionContext& ctx, std::size_t b, Metric metric) {
  check_budget(ctx, b);
  const auto& state = state_of(ctx);
  Matrix storage;
  const Matrix& pts = points_for(ctx, metric, storage);
  const auto& u = state.unlabeled();
  auto d2 = min_distances_to_labeled(pts, state, ctx.exec);
  std::vector<char> taken(u.size(), 0);
  Acquisition out;
  for (std::size_t s = 0; s < b; ++s) {
    std::size_t best = u.size();
    for (std::size_t t = 0; t < u.size(); ++t) {
      if (taken[t]) continue;
      if (best == u.size() || d2[t] > d2[best]) best = t;
    }
    taken[best] = 1;
    out.indices.push_back(u[best]);
    out.scores.push_back(std::sqrt(d2[best]));
    kernels::relax_min_distance(pts, u, pts.row(u[best]), d2, ctx.exec);
  }
  return out;
}

Acquisition select_ceal(const AcquisitionContext& ctx, std::size_t b, double epsilon) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("ceal: epsilon must be >= 0");
  check_budget(ctx, b);
  const auto h = score_uncertainty(ctx);
  Acquisition out = take_top(ctx, h, b);
  const auto& u = state_of(ctx).unlabeled();
  std::vector<char> acquired(state_of(ctx).size(), 0);
  for (auto i : out.indices) acquired[i] = 1;
  for (std::size_t t = 0; t < u.size(); ++t) {
    if (acquired[u[t]] || h[t] > epsilon) continue;
    out.pseudo.emplace_back(u[t], prediction(ctx.probs->row(u[t])));
  }
  return out;
}

Acquisition select_jlp(const AcquisitionContext& ctx, std::size_t b, double alpha, const CgOptions& cg) {
  check_budget(ctx, b);
  const auto& state = state_of(ctx);
  if (state.labeled().empty()) throw InvalidArgument("jlp needs at least one labeled example");
  if (!ctx.graph || ctx.graph->size() != state.size()) throw InvalidArgument("jlp needs a graph over the pool");
  std::vector<char> query(state.size(), 0);
  for (auto l : state.labeled()) query[l] = 1;
  const auto& u = state.unlabeled();
  Acquisition out;
  for (std::size_t s = 0; s < b; ++s) {
    const auto h = manifold_similarity(ctx, query, alpha, cg);
    std::size_t best = state.size();
    for (auto i : u) {
      if (query[i]) continue;
      if (best == state.size() || h[i] < h[best]) best = i;
    }
    query[best] = 1;
    out.indices.push_back(best);
    out.scores.push_back(h[best]);
  }
  return out;
}

Acquisition acquire_batch(const AcquisitionContext& ctx, const Strategy& strat, std::size_t b) {
  check_budget(ctx, b);
  if (b == 0) return {};
  switch (strat.kind) {
    case StrategyKind::random: return select_random(ctx, b);
    case StrategyKind::uncertainty: return select_uncertainty(ctx, b);
    case StrategyKind::coreset: return select_coreset(ctx, b, strat.metric);
    case StrategyKind::ceal: return select_ceal(ctx, b, strat.epsilon);
    case StrategyKind::jlp: return select_jlp(ctx, b, strat.alpha, strat.cg);
  }
  throw InvalidArgument("unknown strategy");
}

std::vector<double> ranking_scores(const AcquisitionContext& ctx, const Strategy& strat) {
  const auto& state = state_of(ctx);
  switch (strat.kind) {
    case StrategyKind::random: return random_keys(ctx);
    case StrategyKind::uncertainty:
    case StrategyKind::ceal: return score_uncertainty(ctx);
    case StrategyKind::coreset: {
      Matrix storage;
      auto d2 = min_distances_to_labeled(points_for(ctx, strat.metric, storage), state, ctx.exec);
      for (double& v : d2) v = std::sqrt(v);
      return d2;
    }
    case StrategyKind::jlp: {
      std::vector<char> query(state.size(), 0);
      for (auto l : state.labeled()) query[l] = 1;
      const auto h = manifold_similarity(ctx, query, strat.alpha, strat.cg);
      std::vector<double> out;
      for (auto i : state.unlabeled()) out.push_back(-h[i]);
      return out;
    }
  }
  throw InvalidArgument("unknown strategy");
}

}  // namespace lpal
