#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/losses.hpp"
#include "mtda/models.hpp"
#include "mtda/optim.hpp"
#include "mtda/schedule.hpp"

namespace mtda {

enum class TrainMode { mt_mtda, mt_mtda_mixed, single_teacher_mixed, fusion_sum, fusion_mean, source_only };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

enum class Fusion { sum, mean };

// Defaults are the digits / LeNet hyper-parameters.
struct TrainConfig {
  TrainMode mode = TrainMode::mt_mtda;
  int epochs = 100;
  std::size_t batch_size = 64;
  LossWeights weights{};
  double s = 0.1;
  double f = 0.8;
  double uda_learning_rate = 0.0005;
  double kd_learning_rate = 0.0005;
  double weight_decay = 0.0005;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::optional<std::size_t> k_splits;
  std::vector<std::size_t> target_order;  // empty: listing order
  bool consistency_enabled = true;
  BetaGranularity beta_granularity = BetaGranularity::epoch;
  bool distill_updates_teacher = false;
  KdConvention kd_convention = KdConvention::student_unit_temperature;
  Preset teacher_preset = Preset::teacher_wide;
  Preset student_preset = Preset::student_compact;
  std::size_t teacher_feature_dim = 0;  // 0: preset default
  std::size_t student_feature_dim = 0;

  // ConfigError describing the first violated constraint. The two-target
  // minimum for fusion modes applies only when require_fusion_pair is set.
  void validate(std::size_t n_targets, bool require_fusion_pair = true) const;
};

// A network with its domain classifier and the optimizer that owns both.
// Optimizer groups are "net" and "dclf"; copies re-bind them.
struct Learner {
  ClassifierNetwork net;
  DomainClassifier dclf;
  Sgd opt;

  Learner(ClassifierNetwork n, DomainClassifier d, Sgd o);
  Learner(const Learner& other);
  Learner& operator=(const Learner& other);
  Learner(Learner&&) noexcept = default;
  Learner& operator=(Learner&&) noexcept = default;

 private:
  void bind();
};

struct StepCounters {
  std::uint64_t da_steps = 0;
  std::uint64_t kd_source_steps = 0;
  std::uint64_t kd_target_steps = 0;
  std::uint64_t source_ce_steps = 0;

  std::uint64_t kd_steps() const { return kd_source_steps + kd_target_steps; }
  friend bool operator==(const StepCounters&, const StepCounters&) = default;
};

// Evaluation snapshot taken at the end of each epoch.
struct EpochSnapshot {
  std::size_t epoch = 0;
  double beta = 0.0;
  std::vector<double> accuracies;  // student, one per eval set, percent
  double equal_weight = 0.0;
  StepCounters counters;           // cumulative
  friend bool operator==(const EpochSnapshot&, const EpochSnapshot&) = default;
};

struct RunState {
  TrainConfig config;
  std::vector<Learner> teachers;
  std::vector<Learner> student;  // exactly one element
  std::vector<std::string> training_target_ids;
  std::size_t epoch = 0;         // completed epochs
  double beta = 0.0;
  StepCounters counters;
  std::vector<EpochSnapshot> history;

  Learner& student_learner() { return student.front(); }
  const Learner& student_learner() const { return student.front(); }
};

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t teacher = 0;
  LossBreakdown loss;
};

// Append-only sink for step and epoch records.
class RunLog {
 public:
  virtual ~RunLog() = default;
  virtual void step(const StepRecord&) {}
  virtual void epoch(const EpochSnapshot&) {}
  virtual void divergence(const std::string&) {}
};

// One JSON object per line.
class JsonlRunLog final : public RunLog {
 public:
  explicit JsonlRunLog(std::ostream& out) : out_(out) {}
  void step(const StepRecord& r) override;
  void epoch(const EpochSnapshot& s) override;
  void divergence(const std::string& message) override;

 private:
  std::ostream& out_;
};

// Loss magnitude beyond which a run is aborted.
inline constexpr double kDivergenceThreshold = 1e6;

// Datasets as the trainer sees them. Targets are stripped of labels on
// entry; eval sets must be labeled and are only used for snapshots.
struct TrainData {
  DomainDataset source;
  std::vector<DomainDataset> targets;
  std::vector<DomainDataset> eval_sets;
};

// Resolves the per-mode training targets (order, mixed splits, merge).
std::vector<DomainDataset> training_targets(const TrainConfig& config, std::span<const DomainDataset> targets);

// Listing index of each training target, the key for per-target randomness
// (teacher init, target batch stream). Mixed and merged modes use positions.
std::vector<std::size_t> target_slots(const TrainConfig& config, std::size_t n_training_targets);

// Builds teachers, student, optimizers and standardization constants.
RunState initialize_run(const TrainConfig& config, const DomainDataset& source,
                        std::span<const DomainDataset> train_targets);

// Continues state from state.epoch up to stop_epoch (default: all epochs).
void run_epochs(RunState& state, const TrainData& data, RunLog* log = nullptr,
                std::optional<std::size_t> stop_epoch = std::nullopt);

// Dispatches on config.mode.
RunState train(const TrainConfig& config, const TrainData& data, RunLog* log = nullptr);

RunState train_mt_mtda(TrainConfig config, const TrainData& data, RunLog* log = nullptr);
RunState train_single_teacher_mixed(TrainConfig config, const TrainData& data, RunLog* log = nullptr);
RunState train_fusion(TrainConfig config, const TrainData& data, Fusion fusion, RunLog* log = nullptr);
RunState train_source_only(TrainConfig config, const TrainData& data, RunLog* log = nullptr);

// Sum or mean of per-teacher logits on the same images.
Tensor fuse_logits(std::span<const Tensor> teacher_logits, Fusion fusion);

// ---------------------------------------------------------------------------
// Checkpoints: binary, versioned, trailing checksum.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void checkpoint_save(const RunState& state, const std::filesystem::path& path);
// CheckpointError on bad magic, version mismatch, truncation or corruption.
RunState checkpoint_load(const std::filesystem::path& path);

}  // namespace mtda
