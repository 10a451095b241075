#include "mtda/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

std::vector<DomainShiftSpec> desk_shifts() {
  return {{ShiftKind::color_remap, 0.8, 11}, {ShiftKind::noise_background, 0.6, 12}, {ShiftKind::affine_jitter, 1.0, 13}};
}

TrainData make_desk_scenario(const DeskScenarioSpec& spec) {
  const auto shifts = spec.shifts.empty() ? desk_shifts() : spec.shifts;
  TrainData data;
  data.source = generate_digits({spec.source_count, spec.image_size, spec.channels, derive_seed(spec.seed, 1), "digits"});
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const DomainDataset base = generate_digits({spec.target_count + spec.eval_count, spec.image_size, spec.channels,
                                                derive_seed(spec.seed, 2, i), "digits"});
    const DomainDataset shifted = generate_shifted_domain(base, shifts[i]);
    std::vector<std::size_t> train_idx(spec.target_count), eval_idx(spec.eval_count);
    std::iota(train_idx.begin(), train_idx.end(), 0);
    std::iota(eval_idx.begin(), eval_idx.end(), spec.target_count);
    data.targets.push_back(shifted.subset(train_idx, shifted.domain_id()).without_labels());
    data.eval_sets.push_back(shifted.subset(eval_idx, shifted.domain_id()));
  }
  return data;
}

TrainConfig desk_config() {
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 32;
  c.uda_learning_rate = 0.01;
  c.kd_learning_rate = 0.003;
  return c;
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ReplicationSummary summarize(std::span<const ReplicationResult> results) {
  if (results.empty()) throw ArgumentError("no replications to summarize");
  ReplicationSummary s;
  for (const auto& t : results.front().report.per_target) s.target_ids.push_back(t.domain_id);
  for (std::size_t j = 0; j < s.target_ids.size(); ++j) {
    std::vector<double> col;
    for (const auto& r : results) col.push_back(r.report.per_target.at(j).accuracy);
    s.mean_per_target.push_back(mean_of(col));
    s.std_per_target.push_back(sample_std(col));
  }
  std::vector<double> eq;
  for (const auto& r : results) eq.push_back(r.report.equal_weight);
  s.mean_equal_weight = mean_of(eq);
  s.std_equal_weight = sample_std(eq);
  return s;
}

nlohmann::json summary_to_json(const ReplicationSummary& s) {
  nlohmann::json doc;
  doc["targets"] = nlohmann::json::array();
  for (std::size_t j = 0; j < s.target_ids.size(); ++j)
    doc["targets"].push_back({{"domain_id", s.target_ids[j]}, {"mean", s.mean_per_target[j]}, {"std", s.std_per_target[j]}});
  doc["equal_weight"] = {{"mean", s.mean_equal_weight}, {"std", s.std_equal_weight}};
  return doc;
}

std::vector<ReplicationResult> run_replications(const TrainConfig& config, const TrainData& data, std::size_t count,
                                                const RunObserver& observer) {
  std::vector<ReplicationResult> out;
  for (std::size_t r = 0; r < count; ++r) {
    TrainConfig c = config;
    c.seed = config.seed + r;
    RunState state = train(c, data);
    if (observer) observer(r, state);
    ReplicationResult res;
    res.seed = c.seed;
    res.report = build_report(state, data.eval_sets, {{"seed", c.seed}, {"mode", to_string(c.mode)}});
    res.history = state.history;
    out.push_back(std::move(res));
  }
  return out;
}

std::string to_string(AblationGrid grid) {
  switch (grid) {
    case AblationGrid::fusion: return "fusion";
    case AblationGrid::order: return "order";
    case AblationGrid::splits: return "splits";
    case AblationGrid::consistency: return "consistency";
    case AblationGrid::teacher_count: return "teacher_count";
  }
  return "?";
}

AblationGrid parse_ablation_grid(const std::string& name) {
  for (auto g : {AblationGrid::fusion, AblationGrid::order, AblationGrid::splits, AblationGrid::consistency,
                 AblationGrid::teacher_count})
    if (to_string(g) == name) return g;
  throw ConfigError("unknown ablation grid '" + name + "'");
}

std::vector<AblationVariant> ablation_variants(AblationGrid grid, const TrainConfig& base, std::size_t n_targets) {
  std::vector<AblationVariant> out;
  auto with_mode = [&](std::string name, TrainMode mode) {
    TrainConfig c = base;
    c.mode = mode;
    out.push_back({std::move(name), c});
  };
  switch (grid) {
    case AblationGrid::fusion:
      with_mode("mean", TrainMode::fusion_mean);
      with_mode("sum", TrainMode::fusion_sum);
      with_mode("alternating", TrainMode::mt_mtda);
      break;
    case AblationGrid::order: {
      if (n_targets > 5) throw ArgumentError("order grid is limited to 5 targets (" + std::to_string(n_targets) + " given)");
      std::vector<std::size_t> perm(n_targets);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        TrainConfig c = base;
        c.mode = TrainMode::mt_mtda;
        c.target_order = perm;
        std::string name = "order";
        for (std::size_t p : perm) name += (name == "order" ? " " : ",") + std::to_string(p);
        out.push_back({name, c});
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case AblationGrid::splits:
      for (std::size_t k = 1; k <= n_targets + 1; ++k) {
        TrainConfig c = base;
        c.mode = TrainMode::mt_mtda_mixed;
        c.k_splits = k;
        out.push_back({"k=" + std::to_string(k), c});
      }
      break;
    case AblationGrid::consistency: {
      TrainConfig with = base, without = base;
      with.mode = without.mode = TrainMode::mt_mtda;
      with.consistency_enabled = true;
      without.consistency_enabled = false;
      out.push_back({"with CST", with});
      out.push_back({"without CST", without});
      break;
    }
    case AblationGrid::teacher_count:
      with_mode("single teacher (mixed)", TrainMode::single_teacher_mixed);
      with_mode("multi teacher", TrainMode::mt_mtda);
      break;
  }
  return out;
}

AblationTable run_ablation(AblationGrid grid, const TrainConfig& base, const TrainData& data,
                           std::size_t replications) {
  AblationTable table;
  table.grid = grid;
  for (const auto& e : data.eval_sets) table.target_ids.push_back(e.domain_id());
  for (const auto& v : ablation_variants(grid, base, data.targets.size())) {
    const auto results = run_replications(v.config, data, replications);
    const auto s = summarize(results);
    table.rows.push_back({v.name, s.mean_per_target, s.mean_equal_weight});
  }
  if (grid == AblationGrid::order) {
    AblationRow sd{"std", {}, 0.0};
    for (std::size_t j = 0; j < table.target_ids.size(); ++j) {
      std::vector<double> col;
      for (const auto& r : table.rows) col.push_back(r.per_target[j]);
      sd.per_target.push_back(sample_std(col));
    }
    std::vector<double> avg;
    for (const auto& r : table.rows) avg.push_back(r.average);
    sd.average = sample_std(avg);
    table.std_row = sd;
  }
  return table;
}

std::string format_table(const AblationTable& t) {
  std::size_t w0 = 8;
  for (const auto& r : t.rows) w0 = std::max(w0, r.variant.size());
  std::vector<std::size_t> widths;
  for (const auto& id : t.target_ids) widths.push_back(std::max<std::size_t>(id.size(), 6));
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(w0)) << "variant";
  for (std::size_t j = 0; j < t.target_ids.size(); ++j) out << "  " << std::setw(static_cast<int>(widths[j])) << t.target_ids[j];
  out << "  average\n";
  auto row = [&](const AblationRow& r) {
    out << std::left << std::setw(static_cast<int>(w0)) << r.variant << std::right << std::fixed << std::setprecision(1);
    for (std::size_t j = 0; j < r.per_target.size(); ++j) out << "  " << std::setw(static_cast<int>(widths[j])) << r.per_target[j];
    out << "  " << std::setw(7) << r.average << '\n' << std::left;
  };
  for (const auto& r : t.rows) row(r);
  if (t.std_row) row(*t.std_row);
  return out.str();
}

nlohmann::json table_to_json(const AblationTable& t) {
  nlohmann::json doc;
  doc["grid"] = to_string(t.grid);
  doc["targets"] = t.target_ids;
  doc["rows"] = nlohmann::json::array();
  auto row = [](const AblationRow& r) {
    return nlohmann::json{{"variant", r.variant}, {"per_target", r.per_target}, {"average", r.average}};
  };
  for (const auto& r : t.rows) doc["rows"].push_back(row(r));
  if (t.std_row) doc["std"] = row(*t.std_row);
  return doc;
}

}  // namespace mtda
