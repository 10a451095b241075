#include "mtda/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "mtda/errors.hpp"
#include "mtda/trainer.hpp"

namespace mtda {

double accuracy(ClassifierNetwork& net, const DomainDataset& eval_set) {
  if (!eval_set.has_labels())
    throw ArgumentError("eval set '" + eval_set.domain_id() + "' has no labels");
  if (eval_set.size() == 0) throw ArgumentError("eval set '" + eval_set.domain_id() + "' is empty");
  const std::vector<int> pred = predict(net, eval_set);
  const auto& labels = eval_set.labels();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::vector<double> per_target_accuracy(ClassifierNetwork& net, std::span<const DomainDataset> eval_sets) {
  std::vector<double> out;
  out.reserve(eval_sets.size());
  for (const auto& e : eval_sets) out.push_back(accuracy(net, e));
  return out;
}

double equal_weight_accuracy(std::span<const double> accs) {
  if (accs.empty()) throw ArgumentError("equal-weight accuracy of an empty list");
  return std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
}

double weighted_accuracy(std::span<const double> accs, std::span<const std::size_t> counts) {
  if (accs.size() != counts.size() || accs.empty())
    throw ArgumentError("weighted accuracy needs one count per accuracy");
  double total = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < accs.size(); ++i) {
    if (counts[i] == 0) throw ArgumentError("weighted accuracy: target counts must be positive");
    total += static_cast<double>(counts[i]);
  }
  for (std::size_t i = 0; i < accs.size(); ++i) acc += static_cast<double>(counts[i]) / total * accs[i];
  return acc;
}

double cosine_domain_shift(const Tensor& features_source, const Tensor& features_target) {
  if (features_source.rank() != 2 || features_target.rank() != 2 ||
      features_source.shape()[1] != features_target.shape()[1])
    throw ShapeError("feature matrices must be [N, F] with equal F, got " + features_source.shape_string() + " and " +
                     features_target.shape_string());
  if (features_source.rows() == 0 || features_target.rows() == 0)
    throw UndefinedValueError("cosine shift of an empty feature set");
  const Eigen::VectorXd a = features_source.matrix().colwise().mean().transpose();
  const Eigen::VectorXd b = features_target.matrix().colwise().mean().transpose();
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw UndefinedValueError("cosine shift undefined for a zero-norm centroid");
  const double cos = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return 1.0 - cos;
}

void export_features(ClassifierNetwork& net, const DomainDataset& data, const std::filesystem::path& path) {
  const Tensor feats = extract_features(net, data);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const std::size_t f = feats.row_size();
  out << "domain_id,label";
  for (std::size_t j = 0; j < f; ++j) out << ",f" << j;
  out << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    out << data.domain_id() << ',';
    if (data.has_labels()) out << data.label(i);
    for (double v : feats.row(i)) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::vector<FeatureRow> read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("domain_id,label", 0) != 0)
    throw FormatError("'" + path.string() + "' is not a feature file");
  const std::size_t width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    FeatureRow row;
    std::getline(ss, row.domain_id, ',');
    std::getline(ss, cell, ',');
    if (!cell.empty()) row.label = std::stoi(cell);
    while (std::getline(ss, cell, ',')) row.features.push_back(std::stod(cell));
    if (row.features.size() != width) throw FormatError("ragged row in '" + path.string() + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

bool MetricsReport::weighted_equals_equal_weight() const {
  if (per_target.empty()) return true;
  const std::size_t n = per_target.front().count;
  for (const auto& t : per_target)
    if (t.count != n) return false;
  return true;
}

MetricsReport make_report(std::span<const TargetAccuracy> per_target) {
  MetricsReport r;
  r.per_target.assign(per_target.begin(), per_target.end());
  std::vector<double> accs;
  std::vector<std::size_t> counts;
  for (const auto& t : per_target) {
    accs.push_back(t.accuracy);
    counts.push_back(t.count);
  }
  r.equal_weight = equal_weight_accuracy(accs);
  r.weighted = weighted_accuracy(accs, counts);
  return r;
}

MetricsReport build_report(RunState& state, std::span<const DomainDataset> eval_sets, nlohmann::json run_metadata) {
  std::vector<TargetAccuracy> rows;
  for (const auto& e : eval_sets) rows.push_back({e.domain_id(), accuracy(state.student_learner().net, e), e.size()});
  MetricsReport r = make_report(rows);
  for (std::size_t i = 0; i < state.teachers.size(); ++i) {
    TeacherAccuracy t;
    t.teacher = i;
    t.trained_on = i < state.training_target_ids.size() ? state.training_target_ids[i] : std::string{};
    t.accuracies = per_target_accuracy(state.teachers[i].net, eval_sets);
    r.teacher_accuracies.push_back(std::move(t));
  }
  r.run_metadata = std::move(run_metadata);
  return r;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["per_target"] = nlohmann::json::array();
  for (const auto& t : report.per_target)
    doc["per_target"].push_back({{"domain_id", t.domain_id}, {"accuracy", t.accuracy}, {"count", t.count}});
  doc["equal_weight"] = report.equal_weight;
  doc["weighted"] = report.weighted;
  doc["teachers"] = nlohmann::json::array();
  for (const auto& t : report.teacher_accuracies)
    doc["teachers"].push_back({{"teacher", t.teacher}, {"trained_on", t.trained_on}, {"accuracies", t.accuracies}});
  doc["run_metadata"] = report.run_metadata;
  return doc;
}

MetricsReport report_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion)
      throw FormatError("report schema version " + doc.at("schema_version").dump() + " is not supported");
    MetricsReport r;
    for (const auto& t : doc.at("per_target"))
      r.per_target.push_back({t.at("domain_id").get<std::string>(), t.at("accuracy").get<double>(),
                              t.at("count").get<std::size_t>()});
    r.equal_weight = doc.at("equal_weight").get<double>();
    r.weighted = doc.at("weighted").get<double>();
    for (const auto& t : doc.at("teachers"))
      r.teacher_accuracies.push_back({t.at("teacher").get<std::size_t>(), t.at("trained_on").get<std::string>(),
                                      t.at("accuracies").get<std::vector<double>>()});
    r.run_metadata = doc.value("run_metadata", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

}  // namespace mtda
