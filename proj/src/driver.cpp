#include "lpal/driver.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>

#include <json.hpp>

#include "lpal/error.hpp"
#include "lpal/graph.hpp"
#include "lpal/random.hpp"

namespace lpal {

void RunConfig::validate() const {
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (per_class == 0) throw ConfigError("per_class must be >= 1");
  if (k_graph == 0) throw ConfigError("k_graph must be >= 1");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0, 1)");
  if (warmup_epochs < 0 || semi_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (!(ceal_epsilon >= 0.0)) throw ConfigError("ceal_epsilon must be >= 0");
  if (semi && std::find(strategies.begin(), strategies.end(), StrategyKind::ceal) != strategies.end())
    throw ConfigError("ceal brings its own pseudo-labels and is not combined with semi");
  plan.validate();
}

std::size_t RunConfig::resolved_budget(std::size_t classes) const {
  return budget ? budget : per_class * classes;
}

double test_accuracy(const Model& model, const Dataset& test) {
  const Matrix p = predict_all(test.features(), model);
  const auto truth = test.evaluation_labels();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (prediction(p.row(i)) == truth[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

namespace {

double pseudo_accuracy(const Propagation& prop, const Dataset& train) {
  if (prop.unlabeled.empty()) return 1.0;
  const auto truth = train.evaluation_labels();
  std::size_t hit = 0;
  for (auto i : prop.unlabeled)
    if (prop.pseudo_labels[i] == truth[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(prop.unlabeled.size());
}

// Fraction of U reached by propagation (nonzero score mass).
double pseudo_coverage(const Propagation& prop) {
  if (prop.unlabeled.empty()) return 1.0;
  std::size_t hit = 0;
  for (auto i : prop.unlabeled) hit += prop.defined[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(prop.unlabeled.size());
}

bool has_weight(const Propagation& prop) {
  for (auto i : prop.unlabeled)
    if (prop.weights[i] > 0.0) return true;
  return false;
}

}  // namespace

CycleRunner::CycleRunner(const RunConfig& config, const Dataset& train, StrategyKind kind, int repeat,
                         ClassifierState theta0)
    : cfg_(config),
      train_(train),
      kind_(kind),
      repeat_(repeat),
      seed_(config.seed + static_cast<std::uint64_t>(repeat)),
      theta0_(std::move(theta0)),
      oracle_(train) {
  const std::size_t c = train.num_classes();
  state_ = cfg_.unbalanced ? init_labels_uniform(train, cfg_.per_class * c, seed_)
                           : init_labels(train, cfg_.per_class, seed_);
}

CycleRecord CycleRunner::train_cycle(const Dataset& test) {
  const std::size_t c = train_.num_classes();
  const Matrix& x = train_.features();
  CycleRecord rec;
  rec.strategy = std::string(strategy_name(kind_));
  rec.repeat = repeat_;
  rec.seed = seed_;
  rec.cycle = cycle_;
  rec.labeled = state_.labeled().size();

  auto rng = make_rng(seed_, kStreamTraining, static_cast<std::uint64_t>(cycle_));
  theta_ = theta0_;
  theta_.restart();

  std::vector<std::size_t> idx = state_.labeled();
  std::vector<int> y = state_.labels();
  for (const auto& [i, label] : ceal_pseudo_) {
    if (state_.is_labeled(i)) continue;
    idx.push_back(i);
    y.push_back(label);
  }
  TrainPlan sup = cfg_.plan;
  sup.epochs = cfg_.semi ? cfg_.warmup_epochs : cfg_.plan.epochs;
  theta_ = train_supervised(x, idx, y, sup, std::move(theta_), rng);

  graph_.reset();
  graph_current_ = false;
  if (cfg_.semi) {
    const bool constant_graph = theta_.model->identity_embedding() && !cfg_.force_graph_rebuild;
    std::optional<Propagation> prop;
    for (int e = 0; e < cfg_.semi_epochs; ++e) {
      if (!graph_ || !constant_graph) {
        graph_ = build_reciprocal_knn(embed_all(x, *theta_.model), cfg_.k_graph);
        ++rec.graph_builds;
        prop = pseudo_label_all(*graph_, state_, c, cfg_.alpha, cfg_.cg);
        ++rec.propagations;
      }
      if (!has_weight(*prop)) {
        // nothing to sample from; fall back to a supervised epoch
        TrainPlan one = cfg_.plan;
        one.epochs = 1;
        theta_ = train_supervised(x, state_.labeled(), state_.labels(), one, std::move(theta_), rng);
        continue;
      }
      theta_ = train_semi(x, state_, *prop, cfg_.plan, std::move(theta_), rng);
    }
    if (prop) {
      rec.pseudo_label_accuracy = pseudo_accuracy(*prop, train_);
      rec.pseudo_label_coverage = pseudo_coverage(*prop);
    }
    graph_current_ = graph_ && theta_.model->identity_embedding();
  }
  rec.accuracy = test_accuracy(*theta_.model, test);
  probs_ = Matrix();
  emb_ = Matrix();
  return rec;
}

AcquisitionContext CycleRunner::context() {
  if (!theta_.model) throw std::logic_error("CycleRunner::context before train_cycle");
  if (probs_.empty()) {
    probs_ = predict_all(train_.features(), *theta_.model);
    emb_ = embed_all(train_.features(), *theta_.model);
  }
  if (!graph_current_) {
    graph_ = build_reciprocal_knn(emb_, cfg_.k_graph);
    graph_current_ = true;
  }
  AcquisitionContext ctx;
  ctx.probs = &probs_;
  ctx.embeddings = &emb_;
  ctx.graph = &*graph_;
  ctx.state = &state_;
  ctx.seed = derive_seed(seed_, kStreamAcquire, static_cast<std::uint64_t>(cycle_));
  return ctx;
}

void CycleRunner::acquire(CycleRecord& rec) {
  Strategy strat;
  strat.kind = kind_;
  strat.epsilon = cfg_.ceal_epsilon;
  strat.alpha = cfg_.alpha;
  strat.metric = cfg_.coreset_metric;
  strat.cg = cfg_.cg;

  AcquisitionContext ctx;
  if (kind_ == StrategyKind::jlp) {
    ctx = context();
  } else {
    if (probs_.empty()) {
      probs_ = predict_all(train_.features(), *theta_.model);
      emb_ = embed_all(train_.features(), *theta_.model);
    }
    ctx.probs = &probs_;
    ctx.embeddings = &emb_;
    ctx.state = &state_;
    ctx.seed = derive_seed(seed_, kStreamAcquire, static_cast<std::uint64_t>(cycle_));
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto acq = acquire_batch(ctx, strat, cfg_.resolved_budget(train_.num_classes()));
  rec.acquisition_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto answers = oracle_.label(acq.indices);
  state_ = state_.commit(acq.indices, answers);
  ceal_pseudo_ = std::move(acq.pseudo);
  rec.acquired = acq.indices.size();
  rec.oracle_calls = oracle_.calls();
  probs_ = Matrix();
  emb_ = Matrix();
  graph_current_ = false;
  ++cycle_;
}

ClassifierState initial_parameters(const RunConfig& cfg, const Dataset& train, int repeat) {
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(repeat);
  return cfg.pre ? pretrain_unsupervised(train.features(), cfg.model, train.num_classes(), cfg.pretrain,
                                         cfg.plan, seed)
                 : initial_state(cfg.model, train.dim(), train.num_classes(), seed);
}

namespace {

std::vector<CycleRecord> run_one(const RunConfig& cfg, const Dataset& train, const Dataset& test,
                                 StrategyKind kind, int repeat, const ClassifierState& theta0) {
  CycleRunner runner(cfg, train, kind, repeat, theta0);
  std::vector<CycleRecord> records;
  for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
    try {
      auto rec = runner.train_cycle(test);
      runner.acquire(rec);
      records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw std::runtime_error("strategy " + std::string(strategy_name(kind)) + ", repeat " +
                               std::to_string(repeat) + ", cycle " + std::to_string(cycle) + ": " + e.what());
    }
  }
  if (runner.oracle().calls() != static_cast<std::size_t>(cfg.cycles) * cfg.resolved_budget(train.num_classes()))
    throw std::logic_error("oracle budget audit failed");
  return records;
}

}  // namespace

std::vector<CycleRecord> run(const RunConfig& cfg, const Dataset& train, const Dataset& test) {
  cfg.validate();
  if (train.dim() != test.dim()) throw InvalidArgument("train and test feature dimensions differ");
  if (train.num_classes() != test.num_classes()) throw InvalidArgument("train and test class counts differ");

  const auto repeats = static_cast<std::size_t>(cfg.repeats);
  std::vector<std::vector<CycleRecord>> per_repeat(repeats);
  std::vector<std::exception_ptr> errors(repeats);
#pragma omp parallel for schedule(dynamic) if (cfg.parallel_repeats)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(repeats); ++r) {
    try {
      const ClassifierState theta0 = initial_parameters(cfg, train, static_cast<int>(r));
      for (auto kind : cfg.strategies) {
        auto recs = run_one(cfg, train, test, kind, static_cast<int>(r), theta0);
        per_repeat[r].insert(per_repeat[r].end(), recs.begin(), recs.end());
      }
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<CycleRecord> out;
  for (auto& v : per_repeat) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<CurvePoint> summarize(std::span<const CycleRecord> records) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
    groups[{r.strategy, r.cycle}].push_back(r.accuracy);
  }
  std::vector<CurvePoint> out;
  for (const auto& s : order) {
    for (const auto& [key, acc] : groups) {
      if (key.first != s) continue;
      if (acc.empty()) throw InvalidArgument("summarize: empty group");
      CurvePoint p;
      p.strategy = s;
      p.cycle = key.second;
      p.repeats = acc.size();
      p.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
      if (acc.size() > 1) {
        double ss = 0.0;
        for (double a : acc) ss += (a - p.mean) * (a - p.mean);
        p.stddev = std::sqrt(ss / static_cast<double>(acc.size() - 1));
      } else {
        p.single = true;
      }
      out.push_back(p);
    }
  }
  if (records.empty()) throw InvalidArgument("summarize: no records");
  return out;
}

std::string format_records_jsonl(std::span<const CycleRecord> records, bool include_timings) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["strategy"] = r.strategy;
    j["repeat"] = r.repeat;
    j["seed"] = r.seed;
    j["cycle"] = r.cycle;
    j["labeled"] = r.labeled;
    j["accuracy"] = r.accuracy;
    j["pseudo_label_accuracy"] =
        r.pseudo_label_accuracy ? nlohmann::ordered_json(*r.pseudo_label_accuracy) : nlohmann::ordered_json();
    j["pseudo_label_coverage"] =
        r.pseudo_label_coverage ? nlohmann::ordered_json(*r.pseudo_label_coverage) : nlohmann::ordered_json();
    j["acquired"] = r.acquired;
    j["oracle_calls"] = r.oracle_calls;
    j["graph_builds"] = r.graph_builds;
    j["propagations"] = r.propagations;
    if (include_timings) j["acquisition_seconds"] = r.acquisition_seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string format_curves_csv(std::span<const CurvePoint> points) {
  std::vector<std::string> strategies;
  int max_cycle = -1;
  for (const auto& p : points) {
    if (std::find(strategies.begin(), strategies.end(), p.strategy) == strategies.end())
      strategies.push_back(p.strategy);
    max_cycle = std::max(max_cycle, p.cycle);
  }
  auto num = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  std::string out = "cycle";
  for (const auto& s : strategies) out += "," + s + "_mean," + s + "_std";
  out += '\n';
  for (int c = 0; c <= max_cycle; ++c) {
    out += std::to_string(c);
    for (const auto& s : strategies) {
      auto it = std::find_if(points.begin(), points.end(),
                             [&](const CurvePoint& p) { return p.strategy == s && p.cycle == c; });
      out += it == points.end() ? ",NA,NA" : "," + num(it->mean) + "," + num(it->stddev);
    }
    out += '\n';
  }
  return out;
}

}  // namespace lpal
