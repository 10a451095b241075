#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtda/data.hpp"
#include "mtda/models.hpp"
#include "mtda/tensor.hpp"

namespace mtda {

struct RunState;

// Percent of correct argmax predictions on a labeled set.
double accuracy(ClassifierNetwork& net, const DomainDataset& eval_set);
// One accuracy per eval set; ArgumentError for an unlabeled set.
std::vector<double> per_target_accuracy(ClassifierNetwork& net, std::span<const DomainDataset> eval_sets);

// Acc^EQ: arithmetic mean. ArgumentError on an empty list.
double equal_weight_accuracy(std::span<const double> accs);
// Acc = sum_i (N_i / sum_j N_j) Acc_i. ArgumentError on length mismatch or
// non-positive counts.
double weighted_accuracy(std::span<const double> accs, std::span<const std::size_t> counts);

// 1 - cos(mean(source rows), mean(target rows)), in [0, 2].
// UndefinedValueError when either centroid has zero norm.
double cosine_domain_shift(const Tensor& features_source, const Tensor& features_target);

// CSV: header "domain_id,label,f0,...,f{F-1}", one row per sample in
// dataset order; label is empty for unlabeled sets.
void export_features(ClassifierNetwork& net, const DomainDataset& data, const std::filesystem::path& path);

struct FeatureRow {
  std::string domain_id;
  std::optional<int> label;
  std::vector<double> features;
};
std::vector<FeatureRow> read_feature_file(const std::filesystem::path& path);

inline constexpr int kReportSchemaVersion = 1;

struct TargetAccuracy {
  std::string domain_id;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct TeacherAccuracy {
  std::size_t teacher = 0;
  std::string trained_on;
  std::vector<double> accuracies;  // one per eval set
};

struct MetricsReport {
  std::vector<TargetAccuracy> per_target;
  double equal_weight = 0.0;
  double weighted = 0.0;
  std::vector<TeacherAccuracy> teacher_accuracies;
  nlohmann::json run_metadata = nlohmann::json::object();

  bool weighted_equals_equal_weight() const;
};

MetricsReport make_report(std::span<const TargetAccuracy> per_target);
// Student rows plus one row per teacher present in the state.
MetricsReport build_report(RunState& state, std::span<const DomainDataset> eval_sets,
                           nlohmann::json run_metadata = nlohmann::json::object());

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& doc);  // FormatError on schema mismatch

// Percent rounded to one decimal, as printed in tables.
double round1(double value);

}  // namespace mtda
