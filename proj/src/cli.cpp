#include "lpal/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "lpal/acquire.hpp"
#include "lpal/analysis.hpp"
#include "lpal/dataset.hpp"
#include "lpal/driver.hpp"
#include "lpal/error.hpp"
#include "lpal/graph.hpp"
#include "lpal/io.hpp"
#include "lpal/propagate.hpp"
#include "lpal/random.hpp"
#include "lpal/synthetic.hpp"

namespace fs = std::filesystem;

namespace lpal {

namespace {

enum Sub : unsigned { kRun = 1, kPropagate = 2, kAcquire = 4, kAgree = 8, kGen = 16, kAll = 31 };

struct Options {
  std::string dataset;
  std::string format;  // empty: infer from extension
  std::string test;
  double test_fraction = 0.2;
  std::string out;
  std::string graph;
  std::string labeled;
  bool dump_graph = false;

  std::string shape = "two-moons";
  std::size_t n = 500;
  double noise = 0.1;
  std::size_t classes = 10;
  std::size_t dim = 2;
  double stddev = 1.0;
  double box = 10.0;

  std::string strategy = "uncertainty";
  std::string reference = "uncertainty";
  std::string compare = "random,coreset,jlp";
  double scatter_fraction = 0.05;

  bool timings = false;
  bool fast = false;
  int threads = 0;
  RunConfig run;
};

struct Setting {
  std::string key;
  std::string help;
  unsigned subs;
  bool flag;
  std::function<void(const std::string&)> set;
  std::function<std::string()> show;
};

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto s = trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("invalid value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

std::string show_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Setting> make_settings(Options& o) {
  std::vector<Setting> s;
  auto str = [&](std::string key, std::string help, unsigned subs, std::string& field) {
    s.push_back({key, help, subs, false, [&field](const std::string& v) { field = trim(v); },
                 [&field] { return field; }});
  };
  auto num = [&]<typename T>(std::string key, std::string help, unsigned subs, T& field) {
    s.push_back({key, help, subs, false,
                 [&field, key](const std::string& v) { field = parse_number<T>(key, v); },
                 [&field] {
                   if constexpr (std::is_floating_point_v<T>)
                     return show_double(field);
                   else
                     return std::to_string(field);
                 }});
  };
  auto flag = [&](std::string key, std::string help, unsigned subs, bool& field) {
    s.push_back({key, help, subs, true, [&field, key](const std::string& v) { field = parse_bool(key, v); },
                 [&field] { return std::string(field ? "true" : "false"); }});
  };
  RunConfig& r = o.run;
  const unsigned learn = kRun | kAcquire | kAgree;

  str("dataset", "dataset file (csv or raw-f32)", kRun | kPropagate | kAcquire | kAgree, o.dataset);
  str("format", "data format: csv | raw-f32 (default: from extension)", kAll, o.format);
  str("test", "held-out test dataset (default: split off test-fraction)", kRun | kAgree, o.test);
  num("test-fraction", "fraction held out for testing when --test is absent", kRun | kAgree, o.test_fraction);
  str("out", "output directory (gen-data: output file)", kAll, o.out);
  num("seed", "base seed; repeat r uses seed + r", kAll, r.seed);
  num("threads", "OpenMP threads (0: runtime default)", kAll, o.threads);

  num("budget", "labels acquired per cycle (0: same as |L_0|)", learn, r.budget);
  num("cycles", "active learning cycles (agree: reference cycles before comparing)", kRun | kAgree, r.cycles);
  num("repeats", "independent repeats with distinct L_0", kRun, r.repeats);
  str("strategy", "acquisition strategy list: random,uncertainty,coreset,ceal,jlp", kRun | kAcquire, o.strategy);
  flag("pre", "unsupervised pre-training", learn, r.pre);
  flag("semi", "semi-supervised training with label propagation", learn, r.semi);
  num("per-class", "initial labels per class", learn | kPropagate, r.per_class);
  flag("unbalanced", "draw L_0 uniformly instead of per class", learn | kPropagate, r.unbalanced);
  num("k-graph", "neighbors in the reciprocal kNN graph", learn | kPropagate, r.k_graph);
  num("alpha", "label propagation alpha", learn | kPropagate, r.alpha);
  num("cg-tol", "conjugate gradient relative tolerance", learn | kPropagate, r.cg.tol);
  num("cg-max-iter", "conjugate gradient iterations (0: 10 sqrt(n) + 100)", learn | kPropagate, r.cg.max_iter);

  str("model", "classifier: linear | embedding", learn, r.model.kind);
  num("embed-dim", "embedding width of the embedding model", learn, r.model.embedding_dim);
  s.push_back({"activation", "embedding activation: identity | relu | tanh", learn, false,
               [&r](const std::string& v) { r.model.activation = parse_activation(trim(v)); },
               [&r] { return std::string(activation_name(r.model.activation)); }});
  num("epochs", "supervised epochs per cycle", learn, r.plan.epochs);
  num("lr", "initial learning rate", learn, r.plan.lr0);
  num("anneal-horizon", "epoch at which the cosine schedule reaches zero", learn, r.plan.anneal_horizon);
  num("momentum", "SGD momentum", learn, r.plan.momentum);
  num("batch-size", "supervised mini-batch size", learn, r.plan.batch_size);
  num("batch-labeled", "labeled examples per semi-supervised mini-batch", learn, r.plan.batch_labeled);
  num("batch-total", "semi-supervised mini-batch size", learn, r.plan.batch_total);
  num("epoch-fraction", "pseudo-label draws per semi epoch as a fraction of |U|", learn, r.plan.epoch_fraction);
  flag("loss-weighting", "also weight pseudo-label losses by certainty", learn, r.plan.loss_weighting);
  num("warmup-epochs", "supervised epochs before the semi loop", learn, r.warmup_epochs);
  num("semi-epochs", "semi-supervised epochs per cycle", learn, r.semi_epochs);
  num("pretrain-clusters", "k-means clusters for pre-training (0: 10 c)", learn, r.pretrain.clusters);
  num("pretrain-rounds", "clustering / training alternations", learn, r.pretrain.rounds);
  num("pretrain-epochs", "training epochs per pre-training round", learn, r.pretrain.epochs_per_round);
  num("kmeans-iter", "Lloyd iterations per clustering", learn, r.pretrain.kmeans.max_iter);
  flag("kmeans-normalize", "l2-normalize embeddings before k-means", learn, r.pretrain.kmeans.normalize);
  num("ceal-epsilon", "CEAL entropy threshold (nats)", learn, r.ceal_epsilon);
  s.push_back({"coreset-metric", "CoreSet distance: euclidean | cosine", learn, false,
               [&r](const std::string& v) { r.coreset_metric = parse_metric(trim(v)); },
               [&r] { return std::string(r.coreset_metric == Metric::euclidean ? "euclidean" : "cosine"); }});
  flag("force-graph-rebuild", "rebuild the graph every epoch even for fixed embeddings", learn,
       r.force_graph_rebuild);
  flag("timings", "include acquisition timings in records.jsonl", kRun, o.timings);
  flag("fast", "short CI profile (20 epochs), not the reference protocol", learn, o.fast);

  str("graph", "edge list 'i j weight' to use instead of building the kNN graph", kPropagate, o.graph);
  str("labeled", "comma-separated labeled indices (default: per-class draw)", kPropagate, o.labeled);
  flag("dump-graph", "also write graph.edges", kPropagate, o.dump_graph);

  str("reference", "reference strategy trained for --cycles cycles", kAgree, o.reference);
  str("compare", "strategies compared against the reference", kAgree, o.compare);
  num("scatter-fraction", "fraction of U exported as rank pairs", kAgree, o.scatter_fraction);

  str("shape", "two-moons | blobs | chain", kGen, o.shape);
  num("n", "examples", kGen, o.n);
  num("noise", "two-moons noise standard deviation", kGen, o.noise);
  num("classes", "blob count", kGen, o.classes);
  num("dim", "blob dimension", kGen, o.dim);
  num("stddev", "blob standard deviation", kGen, o.stddev);
  num("box", "blob centers lie in [-box, box]^dim", kGen, o.box);
  return s;
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  std::istringstream in(read_file(path));
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value' in " + path.string(), lineno);
    kv[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_fast_profile(RunConfig& r) {
  r.plan.epochs = 20;
  r.plan.anneal_horizon = 21;
  r.warmup_epochs = 1;
  r.semi_epochs = 20;
  r.pretrain.rounds = 20;
}

std::vector<StrategyKind> parse_strategies(const std::string& list) {
  std::vector<StrategyKind> out;
  for (const auto& s : split_list(list)) out.push_back(parse_strategy(s));
  if (out.empty()) throw ConfigError("empty strategy list");
  return out;
}

DataFormat format_for(const Options& o, const fs::path& path) {
  return o.format.empty() ? infer_data_format(path) : parse_data_format(o.format);
}

Dataset load(const Options& o, const std::string& path) {
  if (path.empty()) throw ConfigError("--dataset is required");
  return load_dataset(path, format_for(o, path));
}

std::pair<Dataset, Dataset> train_and_test(const Options& o) {
  Dataset all = load(o, o.dataset);
  if (!o.test.empty()) return {std::move(all), load(o, o.test)};
  if (!(o.test_fraction > 0.0 && o.test_fraction < 1.0)) throw ConfigError("test-fraction must lie in (0, 1)");
  std::vector<std::size_t> pos(all.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  auto rng = make_rng(o.run.seed, kStreamSplit);
  std::shuffle(pos.begin(), pos.end(), rng);
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(o.test_fraction * static_cast<double>(all.size())));
  if (m >= all.size()) throw ConfigError("dataset too small to split");
  std::vector<std::size_t> test(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<std::size_t> train(pos.begin() + static_cast<std::ptrdiff_t>(m), pos.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {all.subset(train), all.subset(test)};
}

fs::path output_dir(const Options& o) {
  fs::path dir = o.out.empty() ? fs::path("out") : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v) { return show_double(v); }

int cmd_run(const Options& o, std::ostream& out) {
  RunConfig cfg = o.run;
  cfg.strategies = parse_strategies(o.strategy);
  cfg.validate();
  auto [train, test] = train_and_test(o);
  const auto records = run(cfg, train, test);
  const auto curves = summarize(records);
  const auto dir = output_dir(o);
  write_file_atomic(dir / "records.jsonl", format_records_jsonl(records, o.timings));
  write_file_atomic(dir / "curves.csv", format_curves_csv(curves));
  for (const auto& p : curves)
    out << p.strategy << " cycle " << p.cycle << ": accuracy " << fmt(p.mean) << " +- " << fmt(p.stddev)
        << (p.single ? " (single repeat)" : "") << '\n';
  out << "wrote " << (dir / "records.jsonl").string() << " and " << (dir / "curves.csv").string() << '\n';
  return 0;
}

LabelState labeled_state(const Options& o, const Dataset& ds) {
  if (o.labeled.empty()) {
    return o.run.unbalanced ? init_labels_uniform(ds, o.run.per_class * ds.num_classes(), o.run.seed)
                            : init_labels(ds, o.run.per_class, o.run.seed);
  }
  Oracle oracle(ds);
  std::vector<std::size_t> idx;
  for (const auto& s : split_list(o.labeled)) idx.push_back(parse_number<std::size_t>("labeled", s));
  for (auto i : idx)
    if (i >= ds.size()) throw ConfigError("labeled index " + std::to_string(i) + " out of range");
  return LabelState(ds.size(), idx, oracle.label(idx));
}

int cmd_propagate(const Options& o, std::ostream& out) {
  o.run.validate();
  const Dataset ds = load(o, o.dataset);
  SparseGraph g;
  if (!o.graph.empty()) {
    if (!fs::exists(o.graph)) throw ConfigError("graph file not found: " + o.graph);
    auto w = read_edge_list(o.graph, ds.size());
    if (w.n != ds.size()) throw ConfigError("graph has more nodes than the dataset has rows");
    g = make_graph(std::move(w));
  } else {
    g = build_reciprocal_knn(ds.features(), o.run.k_graph);
  }
  const LabelState state = labeled_state(o, ds);
  const auto prop = pseudo_label_all(g, state, ds.num_classes(), o.run.alpha, o.run.cg);
  std::string csv = "index,pseudo_label,weight\n";
  for (auto i : prop.unlabeled)
    csv += std::to_string(i) + ',' + std::to_string(prop.pseudo_labels[i]) + ',' + fmt(prop.weights[i]) + '\n';
  const auto dir = output_dir(o);
  write_file_atomic(dir / "propagation.csv", csv);
  if (o.dump_graph) write_edge_list(dir / "graph.edges", g.adjacency);
  out << "wrote " << (dir / "propagation.csv").string() << '\n';
  return 0;
}

int cmd_acquire(const Options& o, std::ostream& out) {
  RunConfig cfg = o.run;
  const auto kinds = parse_strategies(o.strategy);
  if (kinds.size() != 1) throw ConfigError("acquire takes exactly one strategy");
  cfg.strategies = kinds;
  cfg.validate();
  const Dataset ds = load(o, o.dataset);
  CycleRunner runner(cfg, ds, kinds[0], 0, initial_parameters(cfg, ds, 0));
  runner.train_cycle(ds);
  const auto ctx = runner.context();
  Strategy strat;
  strat.kind = kinds[0];
  strat.epsilon = cfg.ceal_epsilon;
  strat.alpha = cfg.alpha;
  strat.metric = cfg.coreset_metric;
  strat.cg = cfg.cg;
  const auto acq = acquire_batch(ctx, strat, cfg.resolved_budget(ds.num_classes()));
  std::string csv = "order,index,score\n";
  for (std::size_t t = 0; t < acq.indices.size(); ++t)
    csv += std::to_string(t) + ',' + std::to_string(acq.indices[t]) + ',' + fmt(acq.scores[t]) + '\n';
  const auto dir = output_dir(o);
  write_file_atomic(dir / "acquired.csv", csv);
  out << "wrote " << (dir / "acquired.csv").string() << '\n';
  return 0;
}

int cmd_agree(const Options& o, std::ostream& out) {
  RunConfig cfg = o.run;
  const auto reference = parse_strategy(trim(o.reference));
  const auto compared = parse_strategies(o.compare);
  cfg.strategies = {reference};
  cfg.validate();
  auto [train, test] = train_and_test(o);
  CycleRunner runner(cfg, train, reference, 0, initial_parameters(cfg, train, 0));
  for (int c = 0; c < cfg.cycles; ++c) {
    auto rec = runner.train_cycle(test);
    runner.acquire(rec);
  }
  runner.train_cycle(test);
  const auto ctx = runner.context();
  const std::size_t b = cfg.resolved_budget(train.num_classes());

  auto strategy = [&](StrategyKind k) {
    Strategy s;
    s.kind = k;
    s.epsilon = cfg.ceal_epsilon;
    s.alpha = cfg.alpha;
    s.metric = cfg.coreset_metric;
    s.cg = cfg.cg;
    return s;
  };
  std::vector<AgreementReport> reports;
  std::string scatter = "reference,strategy,index,rank_reference,rank_strategy\n";
  const auto ref_scores = ranking_scores(ctx, strategy(reference));
  Oracle oracle(train);
  for (auto k : compared) {
    reports.push_back(compare_strategies(ctx, train, oracle, strategy(reference), strategy(k), b, cfg.alpha, cfg.cg));
    const auto rows = export_rank_scatter(runner.state().unlabeled(), ref_scores, ranking_scores(ctx, strategy(k)),
                                          o.scatter_fraction, cfg.seed);
    for (const auto& r : rows)
      scatter += std::string(strategy_name(reference)) + ',' + std::string(strategy_name(k)) + ',' +
                 std::to_string(r.index) + ',' + std::to_string(r.rank_a) + ',' + std::to_string(r.rank_b) + '\n';
  }
  const auto dir = output_dir(o);
  write_file_atomic(dir / "agreement.csv", format_agreement_csv(reports));
  write_file_atomic(dir / "scatter.csv", scatter);
  for (const auto& r : reports)
    out << r.strategy_b << " vs " << r.strategy_a << ": " << fmt(r.pct_agree) << "% agree\n";
  out << "wrote " << (dir / "agreement.csv").string() << " and " << (dir / "scatter.csv").string() << '\n';
  return 0;
}

int cmd_gen(const Options& o, std::ostream& out) {
  const fs::path path = o.out.empty() ? fs::path("data.csv") : fs::path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto format = format_for(o, path);
  if (o.shape == "two-moons") {
    if (o.n < 4) throw ConfigError("two-moons needs n >= 4");
    if (!(o.noise >= 0.0)) throw ConfigError("noise must be >= 0");
    save_dataset(path, make_two_moons(o.n, o.noise, o.run.seed), format);
  } else if (o.shape == "blobs") {
    if (o.classes == 0 || o.dim == 0 || o.n < 2 * o.classes) throw ConfigError("blobs need classes, dim >= 1 and n >= 2 classes");
    if (!(o.stddev >= 0.0) || !(o.box > 0.0)) throw ConfigError("blobs need stddev >= 0 and box > 0");
    save_dataset(path, make_blobs(o.n, o.classes, o.dim, o.stddev, o.box, o.run.seed), format);
  } else if (o.shape == "chain") {
    save_dataset(path, make_chain(), format);
    auto edges = path;
    edges.replace_extension(".edges");
    write_edge_list(edges, chain_graph());
    out << "wrote " << edges.string() << '\n';
  } else {
    throw ConfigError("unknown shape '" + o.shape + "' (expected two-moons, blobs or chain)");
  }
  out << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  auto settings = make_settings(o);

  CLI::App app{"Semi-supervised active learning with label propagation"};
  app.require_subcommand(1);
  struct SubInfo {
    CLI::App* app;
    unsigned mask;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config;
  };
  std::vector<SubInfo> subs;
  subs.reserve(5);
  const std::pair<const char*, unsigned> names[] = {
      {"run", kRun}, {"propagate", kPropagate}, {"acquire", kAcquire}, {"agree", kAgree}, {"gen-data", kGen}};
  const char* descriptions[] = {"run active learning cycles and write records.jsonl + curves.csv",
                                "propagate labels over a graph and write propagation.csv",
                                "train on the initial labels and write acquired.csv",
                                "compare acquisition strategies and write agreement.csv + scatter.csv",
                                "write a synthetic dataset"};
  for (std::size_t t = 0; t < 5; ++t) {
    subs.push_back({app.add_subcommand(names[t].first, descriptions[t]), names[t].second, {}, {}, {}});
    auto& si = subs.back();
    si.app->add_option("--config", si.config, "flat 'key = value' file; flags take precedence");
    for (const auto& s : settings) {
      if (!(s.subs & si.mask)) continue;
      auto& slot = si.values[s.key];
      CLI::Option* opt;
      if (s.flag) {
        opt = si.app->add_flag("--" + s.key + "{true}", slot, s.help);
      } else {
        opt = si.app->add_option("--" + s.key, slot, s.help);
      }
      opt->default_str(s.show());
      si.options[s.key] = opt;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  SubInfo* active = nullptr;
  for (auto& si : subs)
    if (si.app->parsed()) active = &si;
  std::map<std::string, const Setting*> by_key;
  for (const auto& s : settings)
    if (s.subs & active->mask) by_key[s.key] = &s;

  try {
    std::map<std::string, std::string> file;
    if (!active->config.empty()) file = read_config_file(active->config);
    for (const auto& [k, v] : file)
      if (!by_key.count(k)) throw ConfigError("unknown config key '" + k + "' for " + active->app->get_name());

    bool fast = false;
    if (auto it = file.find("fast"); it != file.end()) fast = parse_bool("fast", it->second);
    if (active->options.count("fast") && active->options["fast"]->count() > 0)
      fast = parse_bool("fast", active->values["fast"]);
    if (fast) apply_fast_profile(o.run);
    for (const auto& [k, v] : file) by_key[k]->set(v);
    for (const auto& [k, opt] : active->options)
      if (opt->count() > 0) by_key[k]->set(active->values[k]);
    if (o.threads > 0) omp_set_num_threads(o.threads);

    switch (active->mask) {
      case kRun: return cmd_run(o, out);
      case kPropagate: return cmd_propagate(o, out);
      case kAcquire: return cmd_acquire(o, out);
      case kAgree: return cmd_agree(o, out);
      case kGen: return cmd_gen(o, out);
    }
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("lpal");
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace lpal
