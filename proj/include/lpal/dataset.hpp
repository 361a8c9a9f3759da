#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpal/matrix.hpp"

namespace lpal {

inline constexpr int kNoLabel = -1;

// Example pool with hidden ground truth. Immutable after construction.
class Dataset {
 public:
  Dataset() = default;
  // Validates the invariants: n, d >= 1, finite features, labels < num_classes.
  Dataset(Matrix features, std::vector<int> labels, std::size_t num_classes,
          std::vector<std::string> class_names = {});

  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dim() const noexcept { return features_.cols(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const Matrix& features() const noexcept { return features_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  // Ground truth for metrics, balanced initial draws and fixture writing.
  // Acquisition goes through Oracle so the budget stays audited.
  std::span<const int> evaluation_labels() const noexcept { return labels_; }

  // Rows `idx` as a new dataset sharing the class set.
  Dataset subset(std::span<const std::size_t> idx) const;

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
  std::vector<std::string> class_names_;
};

// Simulated annotator. Counts every answered query.
class Oracle {
 public:
  explicit Oracle(const Dataset& ds) : ds_(&ds) {}

  int label(std::size_t idx);
  std::vector<int> label(std::span<const std::size_t> idx);
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  const Dataset* ds_;
  std::atomic<std::size_t> calls_{0};
};

// Labeled/unlabeled partition of the pool at one cycle.
class LabelState {
 public:
  LabelState() = default;
  LabelState(std::size_t n, std::span<const std::size_t> labeled, std::span<const int> labels);

  std::size_t size() const noexcept { return label_of_.size(); }
  // Labeled indices in acquisition order.
  const std::vector<std::size_t>& labeled() const noexcept { return labeled_; }
  // Unlabeled indices, ascending.
  const std::vector<std::size_t>& unlabeled() const noexcept { return unlabeled_; }
  bool is_labeled(std::size_t i) const { return label_of_.at(i) != kNoLabel; }
  int label_of(std::size_t i) const { return label_of_.at(i); }
  // Labels aligned with labeled().
  std::vector<int> labels() const;
  std::size_t cycle() const noexcept { return cycle_; }

  // L <- L u S, U <- U \ S, cycle + 1. Throws when S is not a subset of U.
  LabelState commit(std::span<const std::size_t> batch, std::span<const int> answers) const;

 private:
  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
  std::vector<int> label_of_;
  std::size_t cycle_ = 0;
};

enum class DataFormat { csv, raw_f32 };

DataFormat parse_data_format(std::string_view name);
DataFormat infer_data_format(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
void save_dataset(const std::filesystem::path& path, const Dataset& ds, DataFormat format);

// Exactly per_class examples of every class, uniformly at random under seed.
LabelState init_labels(const Dataset& ds, std::size_t per_class, std::uint64_t seed);
// `count` examples uniformly at random regardless of class.
LabelState init_labels_uniform(const Dataset& ds, std::size_t count, std::uint64_t seed);

inline LabelState commit_batch(const LabelState& state, std::span<const std::size_t> batch,
                               std::span<const int> answers) {
  return state.commit(batch, answers);
}

}  // namespace lpal
