#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t pixels() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

// Immutable image set tagged with a domain identity. Images are stored HWC
// with values in [0,1]. Labels are optional: a dataset without labels plays
// the target role during training and refuses label reads.
class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(std::string domain_id, std::size_t num_classes, ImageShape shape,
                std::vector<float> pixels, std::optional<std::vector<int>> labels);

  const std::string& domain_id() const { return domain_id_; }
  std::size_t num_classes() const { return num_classes_; }
  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool has_labels() const { return labels_ != nullptr; }

  std::span<const float> image(std::size_t i) const;
  std::span<const float> pixels() const { return *pixels_; }
  // Throw LabelAccessError on an unlabeled dataset.
  int label(std::size_t i) const;
  const std::vector<int>& labels() const;

  // Same images, labels dropped. Training code only ever sees targets
  // through this view.
  DomainDataset without_labels() const;
  DomainDataset with_domain_id(std::string id) const;
  DomainDataset subset(std::span<const std::size_t> indices, std::string id) const;

  // NCHW batch of the selected samples.
  Tensor batch_images(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  Tensor all_images() const;

  // Free-form provenance echo (JSON text) written alongside exported data.
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

 private:
  std::string domain_id_;
  std::size_t num_classes_ = 0;
  ImageShape shape_{};
  std::size_t size_ = 0;
  std::shared_ptr<const std::vector<float>> pixels_ = std::make_shared<const std::vector<float>>();
  std::shared_ptr<const std::vector<int>> labels_;
  std::string provenance_;
};

// Concatenation of datasets sharing shape and class count. Labels are kept
// only when every input is labeled.
DomainDataset merge_datasets(std::span<const DomainDataset> parts, std::string domain_id);

// Deterministic (train, eval) split; eval receives round(fraction * N) samples.
std::pair<DomainDataset, DomainDataset> split_train_eval(const DomainDataset& data,
                                                         double eval_fraction, std::uint64_t seed);

// Per-channel mean and standard deviation over every pixel of the dataset.
std::pair<std::vector<double>, std::vector<double>> channel_statistics(const DomainDataset& data);

// ---------------------------------------------------------------------------
// Synthetic domain shifts

enum class ShiftKind { invert, noise_background, blur, affine_jitter, color_remap };

std::string to_string(ShiftKind kind);
ShiftKind parse_shift_kind(const std::string& name);  // ConfigError on unknown

struct DomainShiftSpec {
  ShiftKind kind = ShiftKind::invert;
  double strength = 1.0;  // [0,1]
  std::uint64_t seed = 0;
};

std::string shifted_domain_id(const std::string& base_id, const DomainShiftSpec& spec);
DomainDataset generate_shifted_domain(const DomainDataset& base, const DomainShiftSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic base digits (stroke templates rendered under random affine
// warps), the desk-scale stand-in for a handwritten-digit corpus.

struct DigitsSpec {
  std::size_t count = 1000;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  std::string domain_id = "digits";
};

DomainDataset generate_digits(const DigitsSpec& spec);

// ---------------------------------------------------------------------------
// Mixed pseudo-targets

// Pools every target (domain identities ignored) and partitions the pool
// into k disjoint subsets whose sizes differ by at most one; the remainder
// goes to the lowest-index subsets. Subset j is named "mixed-j".
std::vector<DomainDataset> split_mixed_targets(std::span<const DomainDataset> targets, std::size_t k,
                                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batching

struct BatchPlan {
  std::size_t batch_size = 32;
  std::size_t epoch_length = 0;  // ceil(N_s / batch_size)
  std::uint64_t seed = 0;
};

BatchPlan make_batch_plan(std::size_t source_size, std::size_t batch_size, std::uint64_t seed);

struct BatchIndices {
  std::vector<std::size_t> source;
  std::vector<std::vector<std::size_t>> targets;  // one per target, same order
};

struct BatchTuple {
  Tensor source_images;
  std::vector<int> source_labels;
  std::vector<Tensor> target_images;
};

// Yields epoch_length tuples per epoch. The source is reshuffled every
// epoch; each target is an independent stream reshuffled on every pass and
// cycled when shorter than the source stream. Everything is a pure function
// of (plan.seed, epoch), so any epoch can be regenerated on resume.
// stream_tags keys each target's stream (default: position + 1), letting a
// target keep its stream when the target list is reordered.
class MultiTargetBatchIterator {
 public:
  MultiTargetBatchIterator(const DomainDataset& source, std::vector<DomainDataset> targets,
                           BatchPlan plan, std::vector<std::uint64_t> stream_tags = {});

  std::size_t epoch_length() const { return plan_.epoch_length; }
  std::size_t target_count() const { return targets_.size(); }
  const BatchPlan& plan() const { return plan_; }

  std::vector<BatchIndices> epoch_indices(std::size_t epoch) const;
  BatchTuple materialize(const BatchIndices& indices) const;

 private:
  DomainDataset source_;
  std::vector<DomainDataset> targets_;
  BatchPlan plan_;
  std::vector<std::uint64_t> stream_tags_;
};

// ---------------------------------------------------------------------------
// File formats

// IDX ingestion. Images: magic 0x00000803 (N,H,W; one channel) or
// 0x00000804 (N,H,W,C). Labels: magic 0x00000801.
DomainDataset load_idx_dataset(const std::filesystem::path& images_path,
                               const std::optional<std::filesystem::path>& labels_path,
                               std::string domain_id, std::size_t num_classes = 10);
void write_idx_images(const DomainDataset& data, const std::filesystem::path& path);
void write_idx_labels(const std::vector<int>& labels, const std::filesystem::path& path);

// Versioned dataset directory: meta.json, images.f32 (little-endian float32,
// N*H*W*C in HWC order) and, when labeled, labels.i32.
inline constexpr int kDatasetFormatVersion = 1;
void save_dataset_dir(const DomainDataset& data, const std::filesystem::path& dir);
DomainDataset load_dataset_dir(const std::filesystem::path& dir);

}  // namespace mtda
