#include "mtda/data.hpp"

#include <algorithm>
#include <cmath>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

DomainDataset::DomainDataset(std::string domain_id, std::size_t num_classes, ImageShape shape,
                             std::vector<float> pixels, std::optional<std::vector<int>> labels)
    : domain_id_(std::move(domain_id)), num_classes_(num_classes), shape_(shape) {
  if (shape_.pixels() == 0) throw ArgumentError("dataset image shape must be non-empty");
  if (pixels.size() % shape_.pixels() != 0)
    throw ConsistencyError("pixel buffer is not a whole number of images");
  size_ = pixels.size() / shape_.pixels();
  if (labels) {
    if (labels->size() != size_)
      throw ConsistencyError("label count " + std::to_string(labels->size()) + " != image count " +
                             std::to_string(size_));
    for (int y : *labels)
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes_)
        throw ConsistencyError("label " + std::to_string(y) + " outside [0, " +
                               std::to_string(num_classes_) + ")");
    labels_ = std::make_shared<const std::vector<int>>(std::move(*labels));
  }
  pixels_ = std::make_shared<const std::vector<float>>(std::move(pixels));
}

std::span<const float> DomainDataset::image(std::size_t i) const {
  if (i >= size_) throw ArgumentError("image index out of range");
  const std::size_t n = shape_.pixels();
  return {pixels_->data() + i * n, n};
}

int DomainDataset::label(std::size_t i) const { return labels().at(i); }

const std::vector<int>& DomainDataset::labels() const {
  if (!labels_) throw LabelAccessError("dataset '" + domain_id_ + "' has no labels on this view");
  return *labels_;
}

DomainDataset DomainDataset::without_labels() const {
  DomainDataset d = *this;
  d.labels_.reset();
  return d;
}

DomainDataset DomainDataset::with_domain_id(std::string id) const {
  DomainDataset d = *this;
  d.domain_id_ = std::move(id);
  return d;
}

DomainDataset DomainDataset::subset(std::span<const std::size_t> indices, std::string id) const {
  const std::size_t n = shape_.pixels();
  std::vector<float> px;
  px.reserve(indices.size() * n);
  std::optional<std::vector<int>> ys;
  if (labels_) ys.emplace().reserve(indices.size());
  for (std::size_t i : indices) {
    const auto img = image(i);
    px.insert(px.end(), img.begin(), img.end());
    if (ys) ys->push_back((*labels_)[i]);
  }
  DomainDataset d(std::move(id), num_classes_, shape_, std::move(px), std::move(ys));
  d.provenance_ = provenance_;
  return d;
}

Tensor DomainDataset::batch_images(std::span<const std::size_t> indices) const {
  const std::size_t H = shape_.height, W = shape_.width, C = shape_.channels;
  Tensor t({indices.size(), C, H, W});
  double* out = t.data();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const float* img = image(indices[b]).data();
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) *out++ = img[(y * W + x) * C + c];
  }
  return t;
}

std::vector<int> DomainDataset::batch_labels(std::span<const std::size_t> indices) const {
  const auto& ys = labels();
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(ys.at(i));
  return out;
}

Tensor DomainDataset::all_images() const {
  std::vector<std::size_t> idx(size_);
  for (std::size_t i = 0; i < size_; ++i) idx[i] = i;
  return batch_images(idx);
}

DomainDataset merge_datasets(std::span<const DomainDataset> parts, std::string domain_id) {
  if (parts.empty()) throw ArgumentError("cannot merge an empty list of datasets");
  const ImageShape shape = parts.front().shape();
  const std::size_t classes = parts.front().num_classes();
  bool labeled = true;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (!(p.shape() == shape) || p.num_classes() != classes)
      throw ConsistencyError("cannot merge datasets with different shapes or class counts");
    labeled = labeled && p.has_labels();
    total += p.size();
  }
  std::vector<float> px;
  px.reserve(total * shape.pixels());
  std::optional<std::vector<int>> ys;
  if (labeled) ys.emplace().reserve(total);
  for (const auto& p : parts) {
    px.insert(px.end(), p.pixels().begin(), p.pixels().end());
    if (ys) ys->insert(ys->end(), p.labels().begin(), p.labels().end());
  }
  return DomainDataset(std::move(domain_id), classes, shape, std::move(px), std::move(ys));
}

std::pair<DomainDataset, DomainDataset> split_train_eval(const DomainDataset& data,
                                                         double eval_fraction, std::uint64_t seed) {
  if (!(eval_fraction >= 0.0 && eval_fraction <= 1.0))
    throw ArgumentError("eval fraction must lie in [0,1]");
  Rng rng(derive_seed(seed, 0x5e11u));
  const auto perm = permutation(data.size(), rng);
  const auto n_eval = static_cast<std::size_t>(std::lround(eval_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> eval_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_eval));
  std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_eval), perm.end());
  std::sort(eval_idx.begin(), eval_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {data.subset(train_idx, data.domain_id()), data.subset(eval_idx, data.domain_id())};
}

std::pair<std::vector<double>, std::vector<double>> channel_statistics(const DomainDataset& data) {
  const std::size_t C = data.shape().channels;
  std::vector<double> sum(C, 0.0), sq(C, 0.0);
  const auto px = data.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    sum[i % C] += px[i];
    sq[i % C] += static_cast<double>(px[i]) * px[i];
  }
  const double n = static_cast<double>(px.size() / C);
  std::vector<double> mean(C), stddev(C);
  for (std::size_t c = 0; c < C; ++c) {
    mean[c] = n > 0 ? sum[c] / n : 0.0;
    const double var = n > 0 ? sq[c] / n - mean[c] * mean[c] : 0.0;
    stddev[c] = std::sqrt(std::max(var, 1e-12));
  }
  return {mean, stddev};
}

std::vector<DomainDataset> split_mixed_targets(std::span<const DomainDataset> targets, std::size_t k,
                                               std::uint64_t seed) {
  if (k < 1) throw ArgumentError("number of mixed splits must be >= 1");
  if (targets.empty()) throw ArgumentError("no targets to split");
  const DomainDataset pool = merge_datasets(targets, "mixed-pool");
  if (k > pool.size())
    throw ArgumentError("cannot split " + std::to_string(pool.size()) + " pooled samples into " +
                        std::to_string(k) + " subsets");
  Rng rng(derive_seed(seed, 0x3171u));
  const auto perm = permutation(pool.size(), rng);
  const std::size_t base = pool.size() / k, rem = pool.size() % k;
  std::vector<DomainDataset> out;
  out.reserve(k);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t n = base + (j < rem ? 1 : 0);
    std::span<const std::size_t> idx(perm.data() + offset, n);
    out.push_back(pool.subset(idx, "mixed-" + std::to_string(j)));
    offset += n;
  }
  return out;
}

BatchPlan make_batch_plan(std::size_t source_size, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 2) throw ArgumentError("batch size must be >= 2");
  if (source_size == 0) throw ArgumentError("source dataset is empty");
  return {batch_size, (source_size + batch_size - 1) / batch_size, seed};
}

MultiTargetBatchIterator::MultiTargetBatchIterator(const DomainDataset& source,
                                                   std::vector<DomainDataset> targets, BatchPlan plan,
                                                   std::vector<std::uint64_t> stream_tags)
    : source_(source), targets_(std::move(targets)), plan_(plan), stream_tags_(std::move(stream_tags)) {
  if (source.empty()) throw ArgumentError("source dataset is empty");
  if (stream_tags_.empty())
    for (std::size_t j = 0; j < targets_.size(); ++j) stream_tags_.push_back(j + 1);
  if (stream_tags_.size() != targets_.size()) throw ArgumentError("one stream tag per target is required");
  for (const auto& t : targets_)
    if (t.empty()) throw ArgumentError("target dataset '" + t.domain_id() + "' is empty");
  if (plan_.epoch_length != make_batch_plan(source.size(), plan_.batch_size, plan_.seed).epoch_length)
    throw ArgumentError("batch plan epoch length does not match the source size");
}

std::vector<BatchIndices> MultiTargetBatchIterator::epoch_indices(std::size_t epoch) const {
  const std::size_t B = plan_.batch_size;
  Rng src_rng(derive_seed(plan_.seed ^ epoch, 0x50u));
  const auto src_perm = permutation(source_.size(), src_rng);

  std::vector<BatchIndices> out(plan_.epoch_length);
  for (std::size_t b = 0; b < plan_.epoch_length; ++b) {
    const std::size_t begin = b * B, end = std::min(begin + B, source_.size());
    out[b].source.assign(src_perm.begin() + static_cast<std::ptrdiff_t>(begin),
                         src_perm.begin() + static_cast<std::ptrdiff_t>(end));
    out[b].targets.resize(targets_.size());
  }
  for (std::size_t j = 0; j < targets_.size(); ++j) {
    Rng rng(derive_seed(plan_.seed, epoch, stream_tags_[j]));
    std::vector<std::size_t> cycle = permutation(targets_[j].size(), rng);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < plan_.epoch_length; ++b) {
      auto& batch = out[b].targets[j];
      batch.reserve(B);
      while (batch.size() < B) {
        if (pos == cycle.size()) {
          shuffle(cycle, rng);
          pos = 0;
        }
        batch.push_back(cycle[pos++]);
      }
    }
  }
  return out;
}

BatchTuple MultiTargetBatchIterator::materialize(const BatchIndices& indices) const {
  BatchTuple t;
  t.source_images = source_.batch_images(indices.source);
  t.source_labels = source_.batch_labels(indices.source);
  t.target_images.reserve(targets_.size());
  for (std::size_t j = 0; j < targets_.size(); ++j)
    t.target_images.push_back(targets_[j].batch_images(indices.targets.at(j)));
  return t;
}

}  // namespace mtda
