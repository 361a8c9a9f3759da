#include "lpal/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "lpal/error.hpp"
#include "lpal/random.hpp"

namespace lpal {

double weighted_accuracy(std::span<const int> z, std::span<const int> z2, std::span<const double> w) {
  if (z.size() != z2.size() || z.size() != w.size()) throw InvalidArgument("weighted_accuracy: size mismatch");
  double total = 0.0, hit = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (w[i] < 0.0) throw InvalidArgument("weighted_accuracy: negative weight");
    total += w[i];
    if (z[i] == z2[i]) hit += w[i];
  }
  if (!(total > 0.0)) throw InvalidArgument("weighted_accuracy: weights sum to zero");
  return hit / total;
}

std::optional<double> subset_weighted_accuracy(std::span<const int> z, std::span<const int> z2,
                                               std::span<const double> w, std::span<const char> mask) {
  double total = 0.0, hit = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask[i]) continue;
    total += w[i];
    if (z[i] == z2[i]) hit += w[i];
  }
  if (!(total > 0.0)) return std::nullopt;
  return hit / total;
}

AgreementReport agreement_report(std::span<const int> ya, std::span<const int> yb,
                                 std::span<const double> wa, std::span<const double> wb,
                                 std::span<const int> truth) {
  const std::size_t m = ya.size();
  if (yb.size() != m || wa.size() != m || wb.size() != m || truth.size() != m)
    throw InvalidArgument("agreement_report: size mismatch");
  std::vector<double> w(m);
  std::vector<char> agree(m), disagree(m);
  AgreementReport r;
  r.compared = m;
  double w_sum = 0.0, w_agree_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = 0.5 * (wa[i] + wb[i]);
    agree[i] = ya[i] == yb[i];
    disagree[i] = !agree[i];
    w_sum += w[i];
    if (agree[i]) {
      ++r.agreeing;
      w_agree_sum += w[i];
    }
  }
  r.pct_agree = m ? 100.0 * static_cast<double>(r.agreeing) / static_cast<double>(m) : 0.0;
  r.weighted_agreement = weighted_accuracy(ya, yb, w);
  r.acc_a = weighted_accuracy(ya, truth, w);
  r.acc_b = weighted_accuracy(yb, truth, w);
  r.agree_mass = w_agree_sum / w_sum;
  r.acc_agree = subset_weighted_accuracy(ya, truth, w, agree);
  r.acc_disagree_a = subset_weighted_accuracy(ya, truth, w, disagree);
  r.acc_disagree_b = subset_weighted_accuracy(yb, truth, w, disagree);
  const std::size_t disagreeing = m - r.agreeing;
  if (r.agreeing) r.w_agree = w_agree_sum / static_cast<double>(r.agreeing);
  if (disagreeing) r.w_disagree = (w_sum - w_agree_sum) / static_cast<double>(disagreeing);
  return r;
}

double recombination_gap(const AgreementReport& r, int which) {
  const double acc = which == 0 ? r.acc_a : r.acc_b;
  const auto& dis = which == 0 ? r.acc_disagree_a : r.acc_disagree_b;
  const double s = r.agree_mass;
  double rebuilt = 0.0;
  if (r.acc_agree) rebuilt += s * *r.acc_agree;
  if (dis) rebuilt += (1.0 - s) * *dis;
  return std::abs(acc - rebuilt);
}

AgreementReport compare_strategies(const AcquisitionContext& ctx, const Dataset& ds, Oracle& oracle,
                                   const Strategy& a, const Strategy& b, std::size_t budget,
                                   double alpha, const CgOptions& cg) {
  if (!ctx.state || !ctx.graph) throw InvalidArgument("compare_strategies needs a label state and a graph");
  const LabelState& state = *ctx.state;
  const std::size_t c = ds.num_classes();

  struct Outcome {
    std::vector<char> acquired;
    Propagation prop;
  };
  auto run = [&](const Strategy& s) {
    const auto acq = acquire_batch(ctx, s, budget);
    const auto answers = oracle.label(acq.indices);
    Outcome o;
    o.acquired.assign(state.size(), 0);
    for (auto i : acq.indices) o.acquired[i] = 1;
    o.prop = pseudo_label_all(*ctx.graph, state.commit(acq.indices, answers), c, alpha, cg);
    return o;
  };
  const Outcome oa = run(a);
  const Outcome ob = run(b);

  const auto truth_all = ds.evaluation_labels();
  std::vector<int> ya, yb, truth;
  std::vector<double> wa, wb;
  for (auto i : state.unlabeled()) {
    if (oa.acquired[i] || ob.acquired[i]) continue;
    ya.push_back(oa.prop.pseudo_labels[i]);
    yb.push_back(ob.prop.pseudo_labels[i]);
    wa.push_back(oa.prop.weights[i]);
    wb.push_back(ob.prop.weights[i]);
    truth.push_back(truth_all[i]);
  }
  auto report = agreement_report(ya, yb, wa, wb, truth);
  report.strategy_a = std::string(strategy_name(a.kind));
  report.strategy_b = std::string(strategy_name(b.kind));
  return report;
}

std::vector<std::size_t> dense_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  std::vector<std::size_t> rank(scores.size());
  std::size_t r = 0;
  for (std::size_t t = 0; t < order.size(); ++t) {
    if (t > 0 && scores[order[t]] != scores[order[t - 1]]) ++r;
    rank[order[t]] = r;
  }
  return rank;
}

std::vector<RankPair> export_rank_scatter(std::span<const std::size_t> unlabeled,
                                          std::span<const double> scores_a,
                                          std::span<const double> scores_b, double sample_frac,
                                          std::uint64_t seed) {
  const std::size_t m = unlabeled.size();
  if (scores_a.size() != m || scores_b.size() != m) throw InvalidArgument("export_rank_scatter: size mismatch");
  if (!(sample_frac >= 0.0 && sample_frac <= 1.0)) throw InvalidArgument("sample_frac must lie in [0, 1]");
  const auto ra = dense_ranks(scores_a);
  const auto rb = dense_ranks(scores_b);
  std::vector<std::size_t> pos(m);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  auto rng = make_rng(seed, kStreamScatter);
  std::shuffle(pos.begin(), pos.end(), rng);
  pos.resize(static_cast<std::size_t>(std::llround(sample_frac * static_cast<double>(m))));
  std::sort(pos.begin(), pos.end());
  std::vector<RankPair> out;
  for (auto p : pos) out.push_back({unlabeled[p], ra[p], rb[p]});
  return out;
}

namespace {

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

}  // namespace

std::string format_agreement_csv(std::span<const AgreementReport> reports) {
  std::string out =
      "reference,strategy,compared,pct_agree,weighted_agreement,acc_reference,acc_strategy,"
      "acc_agree,acc_disagree,acc_disagree_reference,w_agree,w_disagree,agree_mass\n";
  for (const auto& r : reports) {
    out += r.strategy_a + ',' + r.strategy_b + ',' + std::to_string(r.compared) + ',' + num(r.pct_agree) + ',' +
           num(r.weighted_agreement) + ',' + num(r.acc_a) + ',' + num(r.acc_b) + ',' + opt(r.acc_agree) + ',' +
           opt(r.acc_disagree_b) + ',' + opt(r.acc_disagree_a) + ',' + opt(r.w_agree) + ',' +
           opt(r.w_disagree) + ',' + num(r.agree_mass) + '\n';
  }
  return out;
}

std::string format_scatter_csv(std::span<const RankPair> rows) {
  std::string out = "index,rank_a,rank_b\n";
  for (const auto& r : rows)
    out += std::to_string(r.index) + ',' + std::to_string(r.rank_a) + ',' + std::to_string(r.rank_b) + '\n';
  return out;
}

}  // namespace lpal
