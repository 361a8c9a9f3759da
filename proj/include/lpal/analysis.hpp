#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpal/acquire.hpp"
#include "lpal/dataset.hpp"
#include "lpal/propagate.hpp"

namespace lpal {

// sum_i eta[w]_i [z_i == z'_i] over aligned vectors. Throws when sum(w) == 0.
double weighted_accuracy(std::span<const int> z, std::span<const int> z2, std::span<const double> w);

// Same, restricted to positions where `mask` is set and renormalized on that
// subset; nullopt when the subset is empty or carries no weight.
std::optional<double> subset_weighted_accuracy(std::span<const int> z, std::span<const int> z2,
                                               std::span<const double> w, std::span<const char> mask);

struct AgreementReport {
  std::string strategy_a;  // reference
  std::string strategy_b;  // compared
  std::size_t compared = 0;       // examples unlabeled under both acquisitions
  std::size_t agreeing = 0;
  double pct_agree = 0.0;         // 100 * agreeing / compared
  double weighted_agreement = 0.0;  // A(y_a, y_b) under averaged weights
  double acc_a = 0.0;             // A(y_a, truth)
  double acc_b = 0.0;             // A(y_b, truth)
  double agree_mass = 0.0;        // eta[w] mass of the agreeing subset
  std::optional<double> acc_agree;       // both strategies' accuracy on the agreeing subset
  std::optional<double> acc_disagree_a;
  std::optional<double> acc_disagree_b;
  std::optional<double> w_agree;         // mean averaged weight on the subset
  std::optional<double> w_disagree;
};

// Agreement of two pseudo-labelings over the same examples with their
// weights averaged; truth gives the accuracies.
AgreementReport agreement_report(std::span<const int> ya, std::span<const int> yb,
                                 std::span<const double> wa, std::span<const double> wb,
                                 std::span<const int> truth);

// |acc - (s * acc_agree + (1 - s) * acc_disagree)| for strategy a (which = 0) or b (which = 1).
double recombination_gap(const AgreementReport& r, int which);

// Acquires b examples with each strategy, labels them through the oracle,
// propagates on ctx.graph and compares the resulting pseudo-labels on the
// examples that remain unlabeled under both.
AgreementReport compare_strategies(const AcquisitionContext& ctx, const Dataset& ds, Oracle& oracle,
                                   const Strategy& a, const Strategy& b, std::size_t budget,
                                   double alpha, const CgOptions& cg = {});

// Dense ranks, 0 for the highest score; equal scores share a rank.
std::vector<std::size_t> dense_ranks(std::span<const double> scores);

struct RankPair {
  std::size_t index;
  std::size_t rank_a;
  std::size_t rank_b;
};

// A random round(sample_frac * |U|) subset of rank pairs, sorted by index.
std::vector<RankPair> export_rank_scatter(std::span<const std::size_t> unlabeled,
                                          std::span<const double> scores_a,
                                          std::span<const double> scores_b, double sample_frac,
                                          std::uint64_t seed);

std::string format_agreement_csv(std::span<const AgreementReport> reports);
std::string format_scatter_csv(std::span<const RankPair> rows);

}  // namespace lpal
