#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpal/cluster.hpp"
#include "lpal/dataset.hpp"
#include "lpal/matrix.hpp"
#include "lpal/propagate.hpp"
#include "lpal/random.hpp"

namespace lpal {

inline constexpr double kProbabilityFloor = 1e-12;

// -log max(p_y, floor)
double cross_entropy(std::span<const double> p, int y);

// In-place softmax.
void softmax(std::span<double> logits);

// Classifier capability: class probabilities f(x), an embedding phi(x) and the
// gradient of the cross-entropy with respect to a flat parameter vector.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::unique_ptr<Model> clone() const = 0;
  virtual std::string_view kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t embedding_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  // phi(x) == x, so the feature geometry never changes during training.
  virtual bool identity_embedding() const = 0;

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  virtual void initialize(Rng& rng) = 0;
  // Replaces the output layer by a freshly initialized one with `classes` outputs.
  virtual void reset_head(std::size_t classes, Rng& rng) = 0;

  virtual void embed(std::span<const double> x, std::span<double> out) const = 0;
  virtual void logits(std::span<const double> x, std::span<double> out) const = 0;

  // grad += scale * d/dtheta CE(softmax(logits(x)), y); returns the CE value.
  virtual double accumulate_gradient(std::span<const double> x, int y, double scale,
                                     std::span<double> grad) const = 0;

  void probabilities(std::span<const double> x, std::span<double> out) const {
    logits(x, out);
    softmax(out);
  }
};

// Softmax regression on the raw features: logits = W x + b.
class LinearSoftmax final : public Model {
 public:
  LinearSoftmax(std::size_t input_dim, std::size_t classes);

  std::unique_ptr<Model> clone() const override { return std::make_unique<LinearSoftmax>(*this); }
  std::string_view kind() const override { return "linear"; }
  std::size_t input_dim() const override { return d_; }
  std::size_t embedding_dim() const override { return d_; }
  std::size_t num_classes() const override { return c_; }
  bool identity_embedding() const override { return true; }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  void initialize(Rng& rng) override;
  void reset_head(std::size_t classes, Rng& rng) override;
  void embed(std::span<const double> x, std::span<double> out) const override;
  void logits(std::span<const double> x, std::span<double> out) const override;
  double accumulate_gradient(std::span<const double> x, int y, double scale,
                             std::span<double> grad) const override;

 private:
  std::size_t d_, c_;
  std::vector<double> params_;  // W (c x d) then b (c)
};

enum class Activation { identity, relu, tanh };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

// One learned embedding layer phi(x) = act(E x + e) under a softmax head
// logits = H phi(x) + h.
class EmbeddingSoftmax final : public Model {
 public:
  EmbeddingSoftmax(std::size_t input_dim, std::size_t embedding_dim, std::size_t classes,
                   Activation act);

  std::unique_ptr<Model> clone() const override { return std::make_unique<EmbeddingSoftmax>(*this); }
  std::string_view kind() const override { return "embedding"; }
  std::size_t input_dim() const override { return d_; }
  std::size_t embedding_dim() const override { return e_; }
  std::size_t num_classes() const override { return c_; }
  bool identity_embedding() const override { return false; }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  void initialize(Rng& rng) override;
  void reset_head(std::size_t classes, Rng& rng) override;
  void embed(std::span<const double> x, std::span<double> out) const override;
  void logits(std::span<const double> x, std::span<double> out) const override;
  double accumulate_gradient(std::span<const double> x, int y, double scale,
                             std::span<double> grad) const override;

  Activation activation() const noexcept { return act_; }

 private:
  std::size_t head_offset() const noexcept { return e_ * d_ + e_; }
  void pre_activation(std::span<const double> x, std::span<double> out) const;

  std::size_t d_, e_, c_;
  Activation act_;
  std::vector<double> params_;  // E (e x d), e (e), H (c x e), h (c)
};

struct ModelSpec {
  std::string kind = "linear";  // linear | embedding
  std::size_t embedding_dim = 64;
  Activation activation = Activation::relu;
};

std::unique_ptr<Model> make_model(const ModelSpec& spec, std::size_t input_dim, std::size_t classes);

// Parameters plus optimizer state.
struct ClassifierState {
  std::unique_ptr<Model> model;
  std::vector<double> velocity;
  int epoch = 0;

  ClassifierState() = default;
  explicit ClassifierState(std::unique_ptr<Model> m);
  ClassifierState(const ClassifierState& other);
  ClassifierState& operator=(const ClassifierState& other);
  ClassifierState(ClassifierState&&) noexcept = default;
  ClassifierState& operator=(ClassifierState&&) noexcept = default;

  // Clears momentum and the schedule position, keeping the parameters.
  void restart();
};

// Randomly initialized state under `seed`.
ClassifierState initial_state(const ModelSpec& spec, std::size_t input_dim, std::size_t classes,
                              std::uint64_t seed);

struct TrainPlan {
  int epochs = 200;
  double lr0 = 0.2;
  int anneal_horizon = 210;
  double momentum = 0.9;
  std::size_t batch_size = 32;     // supervised mini-batch
  std::size_t batch_labeled = 50;  // labeled part of a semi-supervised batch
  std::size_t batch_total = 128;   // full semi-supervised batch
  double epoch_fraction = 0.5;     // pseudo-label draws per epoch as a fraction of |U|
  bool loss_weighting = false;     // additionally scale pseudo-label losses by w

  // Cosine annealing from lr0 at epoch 0 to zero at anneal_horizon.
  double learning_rate(int epoch) const;
  std::size_t epoch_draws(std::size_t unlabeled) const;
  void validate() const;
};

Matrix predict_all(const Matrix& x, const Model& model);
Matrix embed_all(const Matrix& x, const Model& model);
inline Matrix predict_all(const Dataset& ds, const ClassifierState& s) {
  return predict_all(ds.features(), *s.model);
}

double mean_loss(const Model& model, const Matrix& x, std::span<const std::size_t> idx,
                 std::span<const int> labels);

// Mean cross-entropy gradient over the (idx, labels) pairs.
std::vector<double> mean_gradient(const Model& model, const Matrix& x,
                                  std::span<const std::size_t> idx, std::span<const int> labels,
                                  std::span<const double> sample_weights = {});

// Momentum SGD: v <- mu v + g; theta <- theta - lr v.
void sgd_step(ClassifierState& state, std::span<const double> grad, double lr, double momentum);

// plan.epochs epochs of shuffled mini-batch SGD on mean cross-entropy over
// the given examples, continuing the schedule from state.epoch.
ClassifierState train_supervised(const Matrix& x, std::span<const std::size_t> idx,
                                 std::span<const int> labels, const TrainPlan& plan,
                                 ClassifierState state, Rng& rng);
ClassifierState train_supervised(const Dataset& ds, const LabelState& labels, const TrainPlan& plan,
                                 ClassifierState init, std::uint64_t seed);

struct SemiBatch {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> pseudo;
};

// Batches for one semi-supervised epoch: batch_labeled uniform draws from L per
// batch (with replacement only when |L| < batch_labeled) and the remainder drawn
// with replacement from eta[w] on U, until epoch_draws(|U|) pseudo draws.
std::vector<SemiBatch> plan_semi_epoch(const LabelState& state, const Propagation& prop,
                                       const TrainPlan& plan, Rng& rng);

// One epoch on labeled examples and weighted pseudo-labels.
ClassifierState train_semi(const Matrix& x, const LabelState& state, const Propagation& prop,
                           const TrainPlan& plan, ClassifierState init, Rng& rng);

struct PretrainOptions {
  std::size_t clusters = 0;  // 0 selects 10 * classes
  int rounds = 20;
  int epochs_per_round = 1;
  KmeansOptions kmeans;
};

// Alternates k-means on phi(X) with supervised training on the cluster ids
// under a fresh head, then installs a fresh `classes`-way head.
ClassifierState pretrain_unsupervised(const Matrix& x, const ModelSpec& spec, std::size_t classes,
                                      const PretrainOptions& opts, const TrainPlan& plan,
                                      std::uint64_t seed);

// Checkpoint layout (little-endian):
//   char[8] "LPALCKPT", u32 version (1), u32 kind (0 linear, 1 embedding),
//   u32 activation (0 identity, 1 relu, 2 tanh), u32 reserved (0),
//   u64 input_dim, u64 embedding_dim, u64 classes, u64 parameter count,
//   f32 parameters in Model::parameters() order.
std::string format_checkpoint(const Model& model);
std::unique_ptr<Model> parse_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path);

}  // namespace lpal
