#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/metrics.hpp"
#include "mtda/trainer.hpp"

namespace mtda {

// Desk-scale benchmark: synthetic digits as the labeled source and several
// shifted copies (rendered from disjoint digit draws) as targets. Each
// target contributes an unlabeled training pool and a labeled eval set.
struct DeskScenarioSpec {
  std::size_t source_count = 600;
  std::size_t target_count = 600;
  std::size_t eval_count = 400;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  std::vector<DomainShiftSpec> shifts;  // empty: desk_shifts()
  std::uint64_t seed = 7;
};

std::vector<DomainShiftSpec> desk_shifts();
TrainData make_desk_scenario(const DeskScenarioSpec& spec);

// Hyper-parameters shared by every desk-scale run.
TrainConfig desk_config();

struct ReplicationResult {
  std::uint64_t seed = 0;
  MetricsReport report;
  std::vector<EpochSnapshot> history;
};

struct ReplicationSummary {
  std::vector<std::string> target_ids;
  std::vector<double> mean_per_target;
  std::vector<double> std_per_target;
  double mean_equal_weight = 0.0;
  double std_equal_weight = 0.0;
};

// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);
ReplicationSummary summarize(std::span<const ReplicationResult> results);
nlohmann::json summary_to_json(const ReplicationSummary& summary);

using RunObserver = std::function<void(std::size_t replication, const RunState&)>;

// Replication r trains with seed config.seed + r.
std::vector<ReplicationResult> run_replications(const TrainConfig& config, const TrainData& data,
                                                std::size_t count, const RunObserver& observer = {});

enum class AblationGrid { fusion, order, splits, consistency, teacher_count };
std::string to_string(AblationGrid grid);
AblationGrid parse_ablation_grid(const std::string& name);

struct AblationVariant {
  std::string name;
  TrainConfig config;
};

// Variants differ from base only in the ablated factor.
std::vector<AblationVariant> ablation_variants(AblationGrid grid, const TrainConfig& base, std::size_t n_targets);

struct AblationRow {
  std::string variant;
  std::vector<double> per_target;  // seed-averaged accuracies
  double average = 0.0;            // seed-averaged equal-weight accuracy
};

struct AblationTable {
  AblationGrid grid = AblationGrid::fusion;
  std::vector<std::string> target_ids;
  std::vector<AblationRow> rows;
  // grid=order appends a row of standard deviations across permutations.
  std::optional<AblationRow> std_row;
};

AblationTable run_ablation(AblationGrid grid, const TrainConfig& base, const TrainData& data,
                           std::size_t replications);
std::string format_table(const AblationTable& table);
nlohmann::json table_to_json(const AblationTable& table);

}  // namespace mtda
