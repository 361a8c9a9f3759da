#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpal/acquire.hpp"
#include "lpal/graph.hpp"
#include "lpal/dataset.hpp"
#include "lpal/model.hpp"
#include "lpal/propagate.hpp"

namespace lpal {

struct RunConfig {
  std::size_t budget = 0;  // 0: same as |L_0|
  int cycles = 5;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::vector<StrategyKind> strategies{StrategyKind::uncertainty};
  bool pre = false;
  bool semi = false;

  std::size_t per_class = 10;
  bool unbalanced = false;         // uniform L_0 of size per_class * c
  std::size_t k_graph = 50;
  double alpha = 0.99;
  CgOptions cg;

  ModelSpec model;
  TrainPlan plan;                  // plan.epochs is the supervised-only epoch count
  int warmup_epochs = 10;          // supervised epochs before the semi loop
  int semi_epochs = 200;
  PretrainOptions pretrain{0, 250, 1, {}};

  double ceal_epsilon = 0.006;
  Metric coreset_metric = Metric::euclidean;
  bool force_graph_rebuild = false;
  bool parallel_repeats = true;

  // Throws ConfigError on inconsistent settings.
  void validate() const;
  // Budget after resolving the 0 default.
  std::size_t resolved_budget(std::size_t classes) const;
};

struct CycleRecord {
  std::string strategy;
  int repeat = 0;
  std::uint64_t seed = 0;
  int cycle = 0;
  std::size_t labeled = 0;         // |L| used for training in this cycle
  double accuracy = 0.0;           // test accuracy after training, before acquisition
  std::optional<double> pseudo_label_accuracy;  // last propagation vs truth on U
  std::optional<double> pseudo_label_coverage;  // share of U with nonzero propagated mass
  std::size_t acquired = 0;
  std::size_t oracle_calls = 0;    // cumulative after this cycle's acquisition
  std::size_t graph_builds = 0;    // during the semi loop of this cycle
  std::size_t propagations = 0;    // pseudo-labeling passes in this cycle
  double acquisition_seconds = 0.0;
};

// One (repeat, strategy) sequence of active learning cycles. Exposed so that
// analysis tools can stop after any cycle and inspect the trained state.
class CycleRunner {
 public:
  CycleRunner(const RunConfig& config, const Dataset& train, StrategyKind kind, int repeat,
              ClassifierState theta0);

  // Trains from theta_0 on the current labels and evaluates on `test`.
  CycleRecord train_cycle(const Dataset& test);
  // Acquires a batch with the runner's strategy, labels it and commits it.
  void acquire(CycleRecord& record);

  // Acquisition inputs for the model trained by the last train_cycle().
  AcquisitionContext context();

  const LabelState& state() const noexcept { return state_; }
  const ClassifierState& classifier() const noexcept { return theta_; }
  Oracle& oracle() noexcept { return oracle_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int cycle() const noexcept { return cycle_; }

 private:
  const RunConfig& cfg_;
  const Dataset& train_;
  StrategyKind kind_;
  int repeat_;
  std::uint64_t seed_;
  ClassifierState theta0_;
  ClassifierState theta_;
  Oracle oracle_;
  LabelState state_;
  std::vector<std::pair<std::size_t, int>> ceal_pseudo_;
  std::optional<SparseGraph> graph_;
  bool graph_current_ = false;
  Matrix probs_, emb_;
  int cycle_ = 0;
};

// theta_0 for a repeat: pre-trained when config.pre, randomly initialized otherwise.
ClassifierState initial_parameters(const RunConfig& config, const Dataset& train, int repeat);

// Semi-supervised active learning: optional pre-training once per repeat,
// then for every cycle supervised training from theta_0, optional per-epoch
// propagation + weighted semi-supervised epochs, evaluation on `test`, and
// acquisition of a batch labeled by the oracle. Records come back ordered by
// (repeat, strategy, cycle).
std::vector<CycleRecord> run(const RunConfig& config, const Dataset& train, const Dataset& test);

struct CurvePoint {
  std::string strategy;
  int cycle = 0;
  std::size_t repeats = 0;
  double mean = 0.0;
  double stddev = 0.0;   // unbiased; 0 when only one repeat
  bool single = false;
};

// Mean and unbiased standard deviation per (strategy, cycle).
std::vector<CurvePoint> summarize(std::span<const CycleRecord> records);

std::string format_records_jsonl(std::span<const CycleRecord> records, bool include_timings);
// One row per cycle, mean and std columns per strategy.
std::string format_curves_csv(std::span<const CurvePoint> points);

double test_accuracy(const Model& model, const Dataset& test);

}  // namespace lpal
