#include "lpal/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "lpal/error.hpp"
#include "lpal/io.hpp"
#include "lpal/random.hpp"

namespace lpal {

static_assert(std::endian::native == std::endian::little, "raw-f32 I/O assumes a little-endian host");

Dataset::Dataset(Matrix features, std::vector<int> labels, std::size_t num_classes,
                 std::vector<std::string> class_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      class_names_(std::move(class_names)) {
  if (features_.rows() == 0) throw InvalidArgument("dataset has no rows");
  if (features_.cols() == 0) throw InvalidArgument("dataset has no feature columns");
  if (labels_.size() != features_.rows()) throw InvalidArgument("label count != row count");
  if (num_classes_ == 0) throw InvalidArgument("dataset needs at least one class");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= num_classes_)
      throw InvalidArgument("label of row " + std::to_string(i) + " out of range");
  }
  for (std::size_t i = 0; i < features_.rows(); ++i) {
    for (double v : features_.row(i)) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite feature in row " + std::to_string(i));
    }
  }
  if (class_names_.empty()) {
    for (std::size_t c = 0; c < num_classes_; ++c) class_names_.push_back(std::to_string(c));
  }
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Matrix f(idx.size(), dim());
  std::vector<int> y(idx.size());
  for (std::size_t t = 0; t < idx.size(); ++t) {
    auto src = features_.row(idx[t]);
    std::copy(src.begin(), src.end(), f.row(t).begin());
    y[t] = labels_[idx[t]];
  }
  return Dataset(std::move(f), std::move(y), num_classes_, class_names_);
}

int Oracle::label(std::size_t idx) {
  if (idx >= ds_->size())
    throw InvalidArgument("oracle query " + std::to_string(idx) + " out of range (n = " +
                          std::to_string(ds_->size()) + ")");
  calls_.fetch_add(1);
  return ds_->evaluation_labels()[idx];
}

std::vector<int> Oracle::label(std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(label(i));
  return out;
}

LabelState::LabelState(std::size_t n, std::span<const std::size_t> labeled,
                       std::span<const int> labels)
    : label_of_(n, kNoLabel) {
  if (labeled.size() != labels.size()) throw InvalidArgument("labeled/labels size mismatch");
  for (std::size_t t = 0; t < labeled.size(); ++t) {
    const auto i = labeled[t];
    if (i >= n) throw InvalidArgument("labeled index out of range");
    if (labels[t] < 0) throw InvalidArgument("negative label");
    if (label_of_[i] != kNoLabel) throw InvalidArgument("duplicate labeled index");
    label_of_[i] = labels[t];
    labeled_.push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (label_of_[i] == kNoLabel) unlabeled_.push_back(i);
}

std::vector<int> LabelState::labels() const {
  std::vector<int> out;
  out.reserve(labeled_.size());
  for (auto i : labeled_) out.push_back(label_of_[i]);
  return out;
}

LabelState LabelState::commit(std::span<const std::size_t> batch,
                              std::span<const int> answers) const {
  if (batch.size() != answers.size()) throw InvalidArgument("commit: batch/answers size mismatch");
  LabelState next = *this;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto i = batch[t];
    if (i >= size()) throw InvalidArgument("commit: index out of range");
    if (next.label_of_[i] != kNoLabel)
      throw InvalidArgument("commit: index " + std::to_string(i) + " is not unlabeled");
    if (answers[t] < 0) throw InvalidArgument("commit: negative label");
    next.label_of_[i] = answers[t];
    next.labeled_.push_back(i);
  }
  std::erase_if(next.unlabeled_, [&](std::size_t i) { return next.label_of_[i] != kNoLabel; });
  ++next.cycle_;
  return next;
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "raw-f32" || name == "raw_f32" || name == "f32") return DataFormat::raw_f32;
  throw ConfigError("unknown data format '" + std::string(name) + "' (expected csv or raw-f32)");
}

DataFormat infer_data_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".f32" || ext == ".bin" || ext == ".raw") return DataFormat::raw_f32;
  return DataFormat::csv;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  bool have_header = false;
  std::vector<double> values;
  std::vector<int> labels;
  std::map<std::string, int, std::less<>> class_ids;
  std::vector<std::string> class_names;

  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!have_header) {
      if (fields.size() < 2) throw ParseError("header needs at least one feature and a label column", lineno);
      if (fields.back() != "label") throw ParseError("last header column must be 'label'", lineno);
      width = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()), lineno);
    for (std::size_t j = 0; j + 1 < width; ++j) {
      const auto f = fields[j];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
        throw ParseError("malformed feature '" + std::string(f) + "'", lineno);
      if (!std::isfinite(v)) throw ParseError("non-finite feature '" + std::string(f) + "'", lineno);
      values.push_back(v);
    }
    const auto name = fields.back();
    if (name.empty()) throw ParseError("empty label", lineno);
    auto it = class_ids.find(name);
    if (it == class_ids.end()) {
      it = class_ids.emplace(std::string(name), static_cast<int>(class_names.size())).first;
      class_names.emplace_back(name);
    }
    labels.push_back(it->second);
  }
  if (!have_header) throw ParseError("empty dataset file " + path.string());
  if (labels.empty()) throw ParseError("dataset file " + path.string() + " has no rows");
  const auto n = labels.size();
  const auto c = class_names.size();
  return Dataset(Matrix(n, width - 1, std::move(values)), std::move(labels), c, std::move(class_names));
}

template <typename T>
T read_pod(std::string_view bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw ParseError("raw-f32 file truncated");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return v;
}

template <typename T>
void append_pod(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

Dataset load_raw(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw ParseError("empty dataset file " + path.string());
  std::size_t off = 0;
  const auto n = read_pod<std::uint64_t>(bytes, off);
  const auto d = read_pod<std::uint64_t>(bytes, off);
  const auto c = read_pod<std::uint64_t>(bytes, off);
  if (n == 0 || d == 0 || c == 0) throw ParseError("raw-f32 header has a zero dimension");
  const auto expected = 24 + n * d * 4 + n * 4;
  if (bytes.size() != expected)
    throw ParseError("raw-f32 size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                     std::to_string(bytes.size()));
  std::vector<double> values(n * d);
  for (auto& v : values) {
    const float f = read_pod<float>(bytes, off);
    if (!std::isfinite(f)) throw ParseError("non-finite feature in raw-f32 file");
    v = f;
  }
  std::vector<int> labels(n);
  for (auto& y : labels) {
    const auto u = read_pod<std::uint32_t>(bytes, off);
    if (u >= c) throw ParseError("label " + std::to_string(u) + " >= class count");
    y = static_cast<int>(u);
  }
  return Dataset(Matrix(n, d, std::move(values)), std::move(labels), c);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset file not found: " + path.string());
  return format == DataFormat::csv ? load_csv(path) : load_raw(path);
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds, DataFormat format) {
  std::string out;
  const auto labels = ds.evaluation_labels();
  if (format == DataFormat::csv) {
    for (std::size_t j = 0; j < ds.dim(); ++j) out += "x" + std::to_string(j) + ",";
    out += "label\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (double v : ds.features().row(i)) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.append(buf, ptr);
        out += ',';
      }
      out += ds.class_names()[static_cast<std::size_t>(labels[i])];
      out += '\n';
    }
  } else {
    append_pod<std::uint64_t>(out, ds.size());
    append_pod<std::uint64_t>(out, ds.dim());
    append_pod<std::uint64_t>(out, ds.num_classes());
    for (double v : ds.features().data()) append_pod<float>(out, static_cast<float>(v));
    for (int y : labels) append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(y));
  }
  write_file_atomic(path, out);
}

LabelState init_labels(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw InvalidArgument("init_labels: per_class must be positive");
  const auto labels = ds.evaluation_labels();
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  auto rng = make_rng(seed, kStreamInitLabels);
  std::vector<std::size_t> chosen;
  std::vector<int> chosen_labels;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < per_class)
      throw InvalidArgument("init_labels: class '" + ds.class_names()[c] + "' has " +
                            std::to_string(members.size()) + " examples, need " + std::to_string(per_class));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t t = 0; t < per_class; ++t) {
      chosen.push_back(members[t]);
      chosen_labels.push_back(static_cast<int>(c));
    }
  }
  return LabelState(ds.size(), chosen, chosen_labels);
}

LabelState init_labels_uniform(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count > ds.size()) throw InvalidArgument("init_labels_uniform: bad count");
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto rng = make_rng(seed, kStreamInitLabels);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::vector<int> labels;
  for (auto i : all) labels.push_back(ds.evaluation_labels()[i]);
  return LabelState(ds.size(), all, labels);
}

}  // namespace lpal
