#include "lpal/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>

#include "lpal/error.hpp"
#include "lpal/io.hpp"

namespace lpal {

double cross_entropy(std::span<const double> p, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) throw InvalidArgument("cross_entropy: class out of range");
  return -std::log(std::max(p[static_cast<std::size_t>(y)], kProbabilityFloor));
}

void softmax(std::span<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

namespace {

void fill_uniform(std::span<double> out, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : out) v = dist(rng);
}

// dz = softmax(z) - e_y in place; returns the cross-entropy.
double softmax_residual(std::span<double> z, int y) {
  softmax(z);
  const double loss = cross_entropy(z, y);
  z[static_cast<std::size_t>(y)] -= 1.0;
  return loss;
}

void check_label(int y, std::size_t c) {
  if (y < 0 || static_cast<std::size_t>(y) >= c) throw InvalidArgument("training label out of range");
}

}  // namespace

// ---------------------------------------------------------------- linear

LinearSoftmax::LinearSoftmax(std::size_t input_dim, std::size_t classes)
    : d_(input_dim), c_(classes), params_(classes * input_dim + classes, 0.0) {
  if (d_ == 0 || c_ == 0) throw InvalidArgument("LinearSoftmax: zero dimension");
}

void LinearSoftmax::initialize(Rng& rng) { fill_uniform(params_, d_, rng); }

void LinearSoftmax::reset_head(std::size_t classes, Rng& rng) {
  c_ = classes;
  params_.assign(c_ * d_ + c_, 0.0);
  initialize(rng);
}

void LinearSoftmax::embed(std::span<const double> x, std::span<double> out) const {
  std::copy(x.begin(), x.end(), out.begin());
}

void LinearSoftmax::logits(std::span<const double> x, std::span<double> out) const {
  if (x.size() != d_ || out.size() != c_) throw InvalidArgument("LinearSoftmax: dimension mismatch");
  const double* w = params_.data();
  const double* b = params_.data() + c_ * d_;
  for (std::size_t k = 0; k < c_; ++k) {
    double s = b[k];
    for (std::size_t j = 0; j < d_; ++j) s += w[k * d_ + j] * x[j];
    out[k] = s;
  }
}

double LinearSoftmax::accumulate_gradient(std::span<const double> x, int y, double scale,
                                          std::span<double> grad) const {
  check_label(y, c_);
  std::vector<double> z(c_);
  logits(x, z);
  const double loss = softmax_residual(z, y);
  double* gw = grad.data();
  double* gb = grad.data() + c_ * d_;
  for (std::size_t k = 0; k < c_; ++k) {
    const double dz = scale * z[k];
    for (std::size_t j = 0; j < d_; ++j) gw[k * d_ + j] += dz * x[j];
    gb[k] += dz;
  }
  return loss;
}

// ---------------------------------------------------------------- embedding

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

EmbeddingSoftmax::EmbeddingSoftmax(std::size_t input_dim, std::size_t embedding_dim,
                                   std::size_t classes, Activation act)
    : d_(input_dim), e_(embedding_dim), c_(classes), act_(act),
      params_(embedding_dim * input_dim + embedding_dim + classes * embedding_dim + classes, 0.0) {
  if (d_ == 0 || e_ == 0 || c_ == 0) throw InvalidArgument("EmbeddingSoftmax: zero dimension");
}

void EmbeddingSoftmax::initialize(Rng& rng) {
  fill_uniform(std::span(params_).first(head_offset()), d_, rng);
  fill_uniform(std::span(params_).subspan(head_offset()), e_, rng);
}

void EmbeddingSoftmax::reset_head(std::size_t classes, Rng& rng) {
  c_ = classes;
  params_.resize(head_offset() + c_ * e_ + c_);
  fill_uniform(std::span(params_).subspan(head_offset()), e_, rng);
}

void EmbeddingSoftmax::pre_activation(std::span<const double> x, std::span<double> out) const {
  if (x.size() != d_) throw InvalidArgument("EmbeddingSoftmax: input dimension mismatch");
  const double* w = params_.data();
  const double* b = params_.data() + e_ * d_;
  for (std::size_t k = 0; k < e_; ++k) {
    double s = b[k];
    for (std::size_t j = 0; j < d_; ++j) s += w[k * d_ + j] * x[j];
    out[k] = s;
  }
}

void EmbeddingSoftmax::embed(std::span<const double> x, std::span<double> out) const {
  pre_activation(x, out);
  for (double& v : out) {
    switch (act_) {
      case Activation::identity: break;
      case Activation::relu: v = std::max(v, 0.0); break;
      case Activation::tanh: v = std::tanh(v); break;
    }
  }
}

void EmbeddingSoftmax::logits(std::span<const double> x, std::span<double> out) const {
  if (out.size() != c_) throw InvalidArgument("EmbeddingSoftmax: output dimension mismatch");
  std::vector<double> phi(e_);
  embed(x, phi);
  const double* h = params_.data() + head_offset();
  const double* hb = h + c_ * e_;
  for (std::size_t k = 0; k < c_; ++k) {
    double s = hb[k];
    for (std::size_t j = 0; j < e_; ++j) s += h[k * e_ + j] * phi[j];
    out[k] = s;
  }
}

double EmbeddingSoftmax::accumulate_gradient(std::span<const double> x, int y, double scale,
                                             std::span<double> grad) const {
  check_label(y, c_);
  std::vector<double> pre(e_), phi(e_), z(c_);
  pre_activation(x, pre);
  embed(x, phi);
  logits(x, z);
  const double loss = softmax_residual(z, y);

  const double* h = params_.data() + head_offset();
  double* gE = grad.data();
  double* ge = grad.data() + e_ * d_;
  double* gH = grad.data() + head_offset();
  double* gh = gH + c_ * e_;
  std::vector<double> dphi(e_, 0.0);
  for (std::size_t k = 0; k < c_; ++k) {
    const double dz = scale * z[k];
    for (std::size_t j = 0; j < e_; ++j) {
      gH[k * e_ + j] += dz * phi[j];
      dphi[j] += dz * h[k * e_ + j];
    }
    gh[k] += dz;
  }
  for (std::size_t j = 0; j < e_; ++j) {
    double da = dphi[j];
    switch (act_) {
      case Activation::identity: break;
      case Activation::relu: da = pre[j] > 0.0 ? da : 0.0; break;
      case Activation::tanh: da *= 1.0 - phi[j] * phi[j]; break;
    }
    for (std::size_t i = 0; i < d_; ++i) gE[j * d_ + i] += da * x[i];
    ge[j] += da;
  }
  return loss;
}

std::unique_ptr<Model> make_model(const ModelSpec& spec, std::size_t input_dim, std::size_t classes) {
  if (spec.kind == "linear") return std::make_unique<LinearSoftmax>(input_dim, classes);
  if (spec.kind == "embedding")
    return std::make_unique<EmbeddingSoftmax>(input_dim, spec.embedding_dim, classes, spec.activation);
  throw ConfigError("unknown model kind '" + spec.kind + "' (expected linear or embedding)");
}

// ---------------------------------------------------------------- state

ClassifierState::ClassifierState(std::unique_ptr<Model> m)
    : model(std::move(m)), velocity(model->parameters().size(), 0.0) {}

ClassifierState::ClassifierState(const ClassifierState& other)
    : model(other.model ? other.model->clone() : nullptr),
      velocity(other.velocity),
      epoch(other.epoch) {}

ClassifierState& ClassifierState::operator=(const ClassifierState& other) {
  if (this != &other) {
    model = other.model ? other.model->clone() : nullptr;
    velocity = other.velocity;
    epoch = other.epoch;
  }
  return *this;
}

void ClassifierState::restart() {
  velocity.assign(model->parameters().size(), 0.0);
  epoch = 0;
}

ClassifierState initial_state(const ModelSpec& spec, std::size_t input_dim, std::size_t classes,
                              std::uint64_t seed) {
  auto model = make_model(spec, input_dim, classes);
  auto rng = make_rng(seed, kStreamModelInit);
  model->initialize(rng);
  return ClassifierState(std::move(model));
}

// ---------------------------------------------------------------- plan

double TrainPlan::learning_rate(int epoch) const {
  if (epoch >= anneal_horizon) return 0.0;
  if (epoch <= 0) return lr0;
  const double t = static_cast<double>(epoch) / static_cast<double>(anneal_horizon);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * t));
}

std::size_t TrainPlan::epoch_draws(std::size_t unlabeled) const {
  return static_cast<std::size_t>(std::ceil(epoch_fraction * static_cast<double>(unlabeled)));
}

void TrainPlan::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr0 >= 0.0)) throw ConfigError("lr0 must be >= 0");
  if (anneal_horizon <= 0) throw ConfigError("anneal_horizon must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (batch_labeled > batch_total) throw ConfigError("batch_labeled must be <= batch_total");
  if (batch_labeled == batch_total) throw ConfigError("batch_total must leave room for pseudo-labels");
  if (!(epoch_fraction > 0.0)) throw ConfigError("epoch_fraction must be positive");
}

// ---------------------------------------------------------------- training

Matrix predict_all(const Matrix& x, const Model& model) {
  if (x.cols() != model.input_dim())
    throw InvalidArgument("predict_all: feature dimension " + std::to_string(x.cols()) +
                          " != model input " + std::to_string(model.input_dim()));
  Matrix out(x.rows(), model.num_classes());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) model.probabilities(x.row(i), out.row(i));
  return out;
}

Matrix embed_all(const Matrix& x, const Model& model) {
  if (x.cols() != model.input_dim()) throw InvalidArgument("embed_all: feature dimension mismatch");
  Matrix out(x.rows(), model.embedding_dim());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) model.embed(x.row(i), out.row(i));
  return out;
}

double mean_loss(const Model& model, const Matrix& x, std::span<const std::size_t> idx,
                 std::span<const int> labels) {
  if (idx.empty()) return 0.0;
  std::vector<double> p(model.num_classes());
  double total = 0.0;
  for (std::size_t t = 0; t < idx.size(); ++t) {
    model.probabilities(x.row(idx[t]), p);
    total += cross_entropy(p, labels[t]);
  }
  return total / static_cast<double>(idx.size());
}

namespace {

double batch_gradient(const Model& model, const Matrix& x, std::span<const std::size_t> idx,
                      std::span<const int> labels, std::span<const double> weights,
                      std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(idx.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < idx.size(); ++t) {
    const double w = weights.empty() ? 1.0 : weights[t];
    loss += w * model.accumulate_gradient(x.row(idx[t]), labels[t], w * inv, grad);
  }
  return loss * inv;
}

void step_or_throw(ClassifierState& state, std::span<const double> grad, double loss, double lr,
                   double momentum) {
  if (!std::isfinite(loss)) throw DivergenceError("training diverged: non-finite loss");
  sgd_step(state, grad, lr, momentum);
}

}  // namespace

std::vector<double> mean_gradient(const Model& model, const Matrix& x,
                                  std::span<const std::size_t> idx, std::span<const int> labels,
                                  std::span<const double> sample_weights) {
  std::vector<double> grad(model.parameters().size());
  if (!idx.empty()) batch_gradient(model, x, idx, labels, sample_weights, grad);
  return grad;
}

void sgd_step(ClassifierState& state, std::span<const double> grad, double lr, double momentum) {
  auto theta = state.model->parameters();
  if (state.velocity.size() != theta.size()) state.velocity.assign(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.velocity[i] = momentum * state.velocity[i] + grad[i];
    theta[i] -= lr * state.velocity[i];
  }
}

ClassifierState train_supervised(const Matrix& x, std::span<const std::size_t> idx,
                                 std::span<const int> labels, const TrainPlan& plan,
                                 ClassifierState state, Rng& rng) {
  plan.validate();
  if (idx.size() != labels.size()) throw InvalidArgument("train_supervised: idx/labels size mismatch");
  if (idx.empty()) throw InvalidArgument("train_supervised: no training examples");
  for (int y : labels) check_label(y, state.model->num_classes());

  const std::size_t m = idx.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(state.model->parameters().size());
  std::vector<std::size_t> bi;
  std::vector<int> by;
  for (int e = 0; e < plan.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = plan.learning_rate(state.epoch);
    for (std::size_t start = 0; start < m; start += plan.batch_size) {
      const std::size_t stop = std::min(m, start + plan.batch_size);
      bi.clear();
      by.clear();
      for (std::size_t t = start; t < stop; ++t) {
        bi.push_back(idx[order[t]]);
        by.push_back(labels[order[t]]);
      }
      const double loss = batch_gradient(*state.model, x, bi, by, {}, grad);
      step_or_throw(state, grad, loss, lr, plan.momentum);
    }
    ++state.epoch;
  }
  return state;
}

ClassifierState train_supervised(const Dataset& ds, const LabelState& labels, const TrainPlan& plan,
                                 ClassifierState init, std::uint64_t seed) {
  auto rng = make_rng(seed, kStreamTraining);
  const auto y = labels.labels();
  return train_supervised(ds.features(), labels.labeled(), y, plan, std::move(init), rng);
}

std::vector<SemiBatch> plan_semi_epoch(const LabelState& state, const Propagation& prop,
                                       const TrainPlan& plan, Rng& rng) {
  plan.validate();
  const auto& labeled = state.labeled();
  const auto& unlabeled = state.unlabeled();
  if (labeled.empty()) throw InvalidArgument("plan_semi_epoch: no labeled examples");
  if (prop.weights.size() != state.size()) throw InvalidArgument("plan_semi_epoch: propagation size mismatch");

  std::vector<double> w;
  w.reserve(unlabeled.size());
  double total = 0.0;
  for (auto i : unlabeled) {
    w.push_back(prop.weights[i]);
    total += prop.weights[i];
  }
  if (!(total > 0.0)) throw InvalidArgument("plan_semi_epoch: all pseudo-label weights are zero");
  std::discrete_distribution<std::size_t> pseudo_dist(w.begin(), w.end());

  const std::size_t per_batch = plan.batch_total - plan.batch_labeled;
  std::size_t remaining = plan.epoch_draws(unlabeled.size());
  std::vector<std::size_t> pool(labeled);
  std::uniform_int_distribution<std::size_t> any_labeled(0, labeled.size() - 1);

  std::vector<SemiBatch> batches;
  while (remaining > 0) {
    SemiBatch b;
    if (labeled.size() >= plan.batch_labeled) {
      // partial Fisher-Yates: a uniform subset without replacement
      for (std::size_t t = 0; t < plan.batch_labeled; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, pool.size() - 1);
        std::swap(pool[t], pool[pick(rng)]);
        b.labeled.push_back(pool[t]);
      }
    } else {
      for (std::size_t t = 0; t < plan.batch_labeled; ++t) b.labeled.push_back(labeled[any_labeled(rng)]);
    }
    const std::size_t count = std::min(per_batch, remaining);
    for (std::size_t t = 0; t < count; ++t) b.pseudo.push_back(unlabeled[pseudo_dist(rng)]);
    remaining -= count;
    batches.push_back(std::move(b));
  }
  return batches;
}

ClassifierState train_semi(const Matrix& x, const LabelState& state, const Propagation& prop,
                           const TrainPlan& plan, ClassifierState s, Rng& rng) {
  const auto batches = plan_semi_epoch(state, prop, plan, rng);
  const auto c = s.model->num_classes();
  std::vector<double> grad(s.model->parameters().size());
  std::vector<std::size_t> bi;
  std::vector<int> by;
  std::vector<double> bw;
  const double lr = plan.learning_rate(s.epoch);
  for (const auto& b : batches) {
    bi.clear();
    by.clear();
    bw.clear();
    for (auto i : b.labeled) {
      bi.push_back(i);
      by.push_back(state.label_of(i));
      bw.push_back(1.0);
    }
    for (auto i : b.pseudo) {
      const int y = prop.pseudo_labels[i];
      if (state.is_labeled(i) || y < 0 || static_cast<std::size_t>(y) >= c)
        throw InvalidArgument("train_semi: invalid pseudo-label at index " + std::to_string(i));
      bi.push_back(i);
      by.push_back(y);
      bw.push_back(plan.loss_weighting ? prop.weights[i] : 1.0);
    }
    const double loss = batch_gradient(*s.model, x, bi, by, bw, grad);
    step_or_throw(s, grad, loss, lr, plan.momentum);
  }
  ++s.epoch;
  return s;
}

ClassifierState pretrain_unsupervised(const Matrix& x, const ModelSpec& spec, std::size_t classes,
                                      const PretrainOptions& opts, const TrainPlan& plan,
                                      std::uint64_t seed) {
  ClassifierState state = initial_state(spec, x.cols(), classes, seed);
  if (opts.rounds <= 0) return state;
  const std::size_t k = opts.clusters ? opts.clusters : 10 * classes;
  if (k > x.rows()) throw InvalidArgument("pretrain: cluster count exceeds example count");

  TrainPlan round_plan = plan;
  round_plan.epochs = opts.epochs_per_round;
  round_plan.anneal_horizon = std::max(1, opts.rounds * opts.epochs_per_round);
  auto rng = make_rng(seed, kStreamTraining, 0x5eed);
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});

  int epoch = 0;
  for (int r = 0; r < opts.rounds; ++r) {
    const Matrix phi = embed_all(x, *state.model);
    const auto cl = kmeans(phi, k, derive_seed(seed, kStreamKmeans, static_cast<std::uint64_t>(r)), opts.kmeans);
    const auto targets = cluster_pseudo_labels(cl);
    state.model->reset_head(targets.num_classes, rng);
    state.restart();
    state.epoch = epoch;
    state = train_supervised(x, all, targets.labels, round_plan, std::move(state), rng);
    epoch = state.epoch;
  }
  state.model->reset_head(classes, rng);
  state.restart();
  return state;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'L', 'P', 'A', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& off) {
  if (off + sizeof(T) > bytes.size()) throw ParseError("checkpoint truncated");
  T v;
  std::memcpy(&v, bytes.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

std::string format_checkpoint(const Model& model) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const bool embedding = model.kind() == "embedding";
  put<std::uint32_t>(out, embedding ? 1 : 0);
  std::uint32_t act = 0;
  if (embedding) act = static_cast<std::uint32_t>(static_cast<const EmbeddingSoftmax&>(model).activation());
  put<std::uint32_t>(out, act);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, model.input_dim());
  put<std::uint64_t>(out, model.embedding_dim());
  put<std::uint64_t>(out, model.num_classes());
  const auto params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (double v : params) put<float>(out, static_cast<float>(v));
  return out;
}

std::unique_ptr<Model> parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a checkpoint (bad magic)");
  std::size_t off = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, off);
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto kind = get<std::uint32_t>(bytes, off);
  const auto act = get<std::uint32_t>(bytes, off);
  get<std::uint32_t>(bytes, off);
  const auto d = get<std::uint64_t>(bytes, off);
  const auto e = get<std::uint64_t>(bytes, off);
  const auto c = get<std::uint64_t>(bytes, off);
  const auto count = get<std::uint64_t>(bytes, off);
  std::unique_ptr<Model> model;
  if (kind == 0) {
    model = std::make_unique<LinearSoftmax>(d, c);
  } else if (kind == 1) {
    if (act > 2) throw ParseError("checkpoint has unknown activation");
    model = std::make_unique<EmbeddingSoftmax>(d, e, c, static_cast<Activation>(act));
  } else {
    throw ParseError("checkpoint has unknown model kind");
  }
  auto params = model->parameters();
  if (count != params.size()) throw ParseError("checkpoint parameter count does not match its shape");
  for (double& v : params) v = get<float>(bytes, off);
  if (off != bytes.size()) throw ParseError("trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_file_atomic(path, format_checkpoint(model));
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace lpal
