#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "mtda/config.hpp"
#include "mtda/errors.hpp"
#include "mtda/experiment.hpp"
#include "mtda/metrics.hpp"
#include "mtda/rng.hpp"
#include "mtda/trainer.hpp"

namespace fs = std::filesystem;
using namespace mtda;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

// A domain directory holds train/ and eval/ dataset directories; anything
// else must itself be a dataset directory.
bool is_domain_dir(const fs::path& p) { return fs::exists(p / "train" / "meta.json"); }

DomainDataset load_train_split(const fs::path& p) {
  return load_dataset_dir(is_domain_dir(p) ? p / "train" : p);
}

DomainDataset load_eval_split(const fs::path& p) {
  if (is_domain_dir(p)) return load_dataset_dir(p / "eval");
  return load_dataset_dir(p);
}

TrainData load_train_data(const RunManifest& m) {
  if (m.source.empty()) throw ConfigError("data.source is not set");
  TrainData data;
  data.source = load_train_split(m.source);
  for (const auto& t : m.targets) data.targets.push_back(load_train_split(t).without_labels());
  if (!m.eval.empty()) {
    for (const auto& e : m.eval) data.eval_sets.push_back(load_eval_split(e));
  } else {
    for (const auto& t : m.targets) {
      if (!is_domain_dir(t))
        throw ConfigError("target '" + t.string() + "' has no eval/ split; list eval sets under data.eval");
      data.eval_sets.push_back(load_eval_split(t));
    }
  }
  return data;
}

bool deterministic_env() {
  const char* v = std::getenv("MTDA_DETERMINISTIC");
  return v && std::string(v) == "1";
}

nlohmann::json run_metadata(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"epochs", c.epochs},
          {"config", config_to_json(c)},
          {"deterministic", true},
          {"MTDA_DETERMINISTIC", deterministic_env()}};
}

class ProgressLog final : public RunLog {
 public:
  ProgressLog(std::ostream& jsonl, std::size_t replication) : file_(jsonl), replication_(replication) {}
  void step(const StepRecord& r) override { file_.step(r); }
  void epoch(const EpochSnapshot& s) override {
    file_.epoch(s);
    std::cout << "[rep " << replication_ << "] epoch " << s.epoch + 1 << "  beta " << s.beta << "  acc_eq "
              << round1(s.equal_weight) << std::endl;
  }
  void divergence(const std::string& m) override { file_.divergence(m); }

 private:
  JsonlRunLog file_;
  std::size_t replication_;
};

// Runs (or continues) one replication with a checkpoint after every epoch.
MetricsReport run_one(RunState& state, const TrainData& data, const fs::path& dir, std::size_t replication) {
  fs::create_directories(dir);
  std::ofstream log_file(dir / "run.jsonl", std::ios::app);
  ProgressLog log(log_file, replication);
  for (std::size_t e = state.epoch; e < static_cast<std::size_t>(state.config.epochs); ++e) {
    run_epochs(state, data, &log, e + 1);
    checkpoint_save(state, dir / "checkpoint.bin");
  }
  MetricsReport report = build_report(state, data.eval_sets, run_metadata(state.config));
  write_json(dir / "report.json", report_to_json(report));
  return report;
}

void print_report(const MetricsReport& r) {
  for (const auto& t : r.per_target)
    std::cout << "  " << t.domain_id << ": " << round1(t.accuracy) << " (" << t.count << " samples)\n";
  std::cout << "  equal-weight: " << round1(r.equal_weight) << "  weighted: " << round1(r.weighted) << "\n";
  for (const auto& t : r.teacher_accuracies) {
    std::cout << "  teacher " << t.teacher << " [" << t.trained_on << "]:";
    for (double a : t.accuracies) std::cout << ' ' << round1(a);
    std::cout << '\n';
  }
}

struct TrainArgs {
  fs::path config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<int> epochs;
  std::optional<std::size_t> replications;
  std::string resume;
  std::vector<std::string> sets;
};

RunManifest resolve_manifest(const TrainArgs& a) {
  RunManifest m = load_manifest(a.config);
  if (!a.out.empty()) m.output_dir = a.out;
  if (a.seed) m.config.seed = *a.seed;
  if (!a.mode.empty()) apply_train_key(m.config, "mode", a.mode);
  if (a.epochs) m.config.epochs = *a.epochs;
  if (a.replications) m.replications = *a.replications;
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_train_key(m.config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (m.replications < 1) throw ConfigError("replications must be >= 1");
  return m;
}

int cmd_train(const TrainArgs& a) {
  RunManifest m = resolve_manifest(a);
  const TrainData data = load_train_data(m);
  m.config.validate(data.targets.size());
  fs::create_directories(m.output_dir);
  write_text(m.output_dir / "config.ini", manifest_to_ini(m));
  std::cout << "# resolved config (" << (m.output_dir / "config.ini").string() << ")\n" << manifest_to_ini(m) << std::endl;

  std::vector<ReplicationResult> results;
  for (std::size_t r = 0; r < m.replications; ++r) {
    const fs::path dir = m.output_dir / ("rep-" + std::to_string(r));
    RunState state;
    if (!a.resume.empty() && r == 0) {
      state = checkpoint_load(a.resume);
      if (state.epoch >= static_cast<std::size_t>(state.config.epochs))
        std::cout << "checkpoint already complete (" << state.epoch << " epochs)\n";
    } else {
      TrainConfig c = m.config;
      c.seed = m.config.seed + r;
      state = initialize_run(c, data.source, training_targets(c, data.targets));
    }
    ReplicationResult res;
    res.seed = state.config.seed;
    res.report = run_one(state, data, dir, r);
    res.history = state.history;
    std::cout << "replication " << r << " (seed " << res.seed << ")\n";
    print_report(res.report);
    results.push_back(std::move(res));
  }
  const ReplicationSummary s = summarize(results);
  write_json(m.output_dir / "summary.json", summary_to_json(s));
  std::cout << "summary over " << results.size() << " replication(s): equal-weight " << round1(s.mean_equal_weight)
            << " +- " << round1(s.std_equal_weight) << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& checkpoint, const std::vector<fs::path>& eval_paths, const std::string& out) {
  RunState state = checkpoint_load(checkpoint);
  std::vector<DomainDataset> evals;
  for (const auto& p : eval_paths) evals.push_back(load_eval_split(p));
  const MetricsReport r = build_report(state, evals, run_metadata(state.config));
  print_report(r);
  if (!out.empty()) write_json(out, report_to_json(r));
  return 0;
}

int cmd_ablate(const TrainArgs& a, const std::string& grid_name) {
  const AblationGrid grid = parse_ablation_grid(grid_name);
  RunManifest m = resolve_manifest(a);
  const TrainData data = load_train_data(m);
  fs::create_directories(m.output_dir);
  write_text(m.output_dir / "config.ini", manifest_to_ini(m));
  const AblationTable t = run_ablation(grid, m.config, data, m.replications);
  const std::string text = format_table(t);
  std::cout << text;
  write_text(m.output_dir / ("ablation-" + grid_name + ".txt"), text);
  write_json(m.output_dir / ("ablation-" + grid_name + ".json"), table_to_json(t));
  return 0;
}

int cmd_export(const fs::path& checkpoint, const fs::path& data_path, const fs::path& out,
               std::optional<std::size_t> teacher) {
  RunState state = checkpoint_load(checkpoint);
  DomainDataset data = load_eval_split(data_path);
  if (teacher) {
    if (*teacher >= state.teachers.size()) throw ArgumentError("checkpoint has no teacher " + std::to_string(*teacher));
    export_features(state.teachers[*teacher].net, data, out);
  } else {
    export_features(state.student_learner().net, data, out);
  }
  std::cout << "wrote " << data.size() << " feature rows to " << out.string() << "\n";
  return 0;
}

DomainDataset replicate_channels(const DomainDataset& d, std::size_t channels) {
  if (d.shape().channels == channels) return d;
  if (d.shape().channels != 1) throw ConfigError("can only replicate single-channel images");
  ImageShape s = d.shape();
  s.channels = channels;
  std::vector<float> px;
  px.reserve(d.size() * s.pixels());
  for (float v : d.pixels())
    for (std::size_t c = 0; c < channels; ++c) px.push_back(v);
  return DomainDataset(d.domain_id(), d.num_classes(), s, std::move(px),
                       d.has_labels() ? std::optional(d.labels()) : std::nullopt);
}

DomainShiftSpec parse_shift_arg(const std::string& text, std::uint64_t default_seed) {
  // kind:strength[:seed]
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() < 2 || parts.size() > 3) throw ConfigError("shift '" + text + "' must be kind:strength[:seed]");
  DomainShiftSpec spec;
  spec.kind = parse_shift_kind(parts[0]);
  try {
    std::size_t used = 0;
    spec.strength = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
    spec.seed = parts.size() == 3 ? std::stoull(parts[2]) : default_seed;
  } catch (const std::logic_error&) {
    throw ConfigError("shift '" + text + "': strength/seed is not a number");
  }
  if (!(spec.strength >= 0.0 && spec.strength <= 1.0))
    throw ConfigError("shift '" + text + "': strength must lie in [0,1]");
  return spec;
}

struct GenerateArgs {
  fs::path out;
  std::string base_images, base_labels;
  std::size_t count = 3000;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  double eval_fraction = 0.1;
  std::vector<std::string> shifts;
};

int cmd_generate(const GenerateArgs& a) {
  std::vector<DomainShiftSpec> specs;
  for (std::size_t i = 0; i < a.shifts.size(); ++i) specs.push_back(parse_shift_arg(a.shifts[i], derive_seed(a.seed, 50 + i)));
  const std::size_t n_domains = specs.size() + 1;

  // Domain j (0 = source) draws its images from its own slice of the base.
  std::vector<DomainDataset> bases;
  if (!a.base_images.empty()) {
    std::optional<fs::path> labels;
    if (!a.base_labels.empty()) labels = a.base_labels;
    const DomainDataset base = replicate_channels(load_idx_dataset(a.base_images, labels, "base"), a.channels);
    if (base.size() < n_domains) throw ConfigError("base dataset too small for " + std::to_string(n_domains) + " domains");
    Rng rng(derive_seed(a.seed, 0xba5e));
    const auto perm = permutation(base.size(), rng);
    const std::size_t per = base.size() / n_domains;
    for (std::size_t j = 0; j < n_domains; ++j) {
      std::vector<std::size_t> idx(perm.begin() + static_cast<long>(j * per), perm.begin() + static_cast<long>((j + 1) * per));
      bases.push_back(base.subset(idx, "base"));
    }
  } else {
    for (std::size_t j = 0; j < n_domains; ++j)
      bases.push_back(generate_digits({a.count, a.image_size, a.channels, derive_seed(a.seed, 0xd191, j), "digits"}));
  }

  auto emit = [&](const DomainDataset& d, const std::string& name) {
    auto [train, eval] = split_train_eval(d, a.eval_fraction, derive_seed(a.seed, 0x5e11));
    save_dataset_dir(train, a.out / name / "train");
    save_dataset_dir(eval, a.out / name / "eval");
    std::cout << name << ": " << train.size() << " train / " << eval.size() << " eval\n";
  };
  emit(bases[0].with_domain_id("source"), "source");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const DomainDataset shifted = generate_shifted_domain(bases[i + 1], specs[i]);
    names.push_back(shifted.domain_id());
    emit(shifted, shifted.domain_id());
  }

  RunManifest m;
  m.source = fs::absolute(a.out / "source");
  for (const auto& n : names) m.targets.push_back(fs::absolute(a.out / n));
  m.output_dir = fs::absolute(a.out / "runs" / "default");
  write_text(a.out / "config.ini", manifest_to_ini(m));
  std::cout << "template config: " << (a.out / "config.ini").string() << "\n";
  return 0;
}

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "INI run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "output directory (overrides run.output_dir)");
  cmd->add_option("--seed", a.seed, "base seed");
  cmd->add_option("--mode", a.mode, "training mode");
  cmd->add_option("--epochs", a.epochs, "number of epochs");
  cmd->add_option("--replications", a.replications, "number of seeds");
  cmd->add_option("--set", a.sets, "override any [train] key: key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-teacher multi-target domain adaptation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate-data", "build source and shifted target domains");
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_option("--base-images", gen.base_images, "IDX image file (default: synthetic digits)");
  generate->add_option("--base-labels", gen.base_labels, "IDX label file");
  generate->add_option("--count", gen.count, "synthetic images per domain");
  generate->add_option("--image-size", gen.image_size, "synthetic image side");
  generate->add_option("--channels", gen.channels, "image channels");
  generate->add_option("--seed", gen.seed, "seed");
  generate->add_option("--eval-fraction", gen.eval_fraction, "held-out fraction per domain");
  generate->add_option("--shift", gen.shifts, "target domain as kind:strength[:seed]; repeatable")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train in the configured mode");
  add_train_flags(train, train_args);
  train->add_option("--resume", train_args.resume, "continue replication 0 from a checkpoint")->check(CLI::ExistingFile);

  TrainArgs ablate_args;
  std::string grid;
  auto* ablate = app.add_subcommand("ablate", "run an ablation grid and print the comparison table");
  add_train_flags(ablate, ablate_args);
  ablate->add_option("--grid", grid, "fusion | order | splits | consistency | teacher_count")->required();

  fs::path ckpt;
  std::vector<fs::path> eval_paths;
  std::string report_out;
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on labeled eval sets");
  evaluate->add_option("--checkpoint", ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--eval", eval_paths, "eval dataset or domain directories")->required();
  evaluate->add_option("--out", report_out, "write the report as JSON");

  fs::path feat_ckpt, feat_data, feat_out;
  std::optional<std::size_t> teacher;
  auto* exportf = app.add_subcommand("export-features", "write penultimate features as CSV");
  exportf->add_option("--checkpoint", feat_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  exportf->add_option("--data", feat_data, "dataset or domain directory")->required();
  exportf->add_option("--out", feat_out, "CSV path")->required();
  exportf->add_option("--teacher", teacher, "export a teacher instead of the student");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(gen);
    if (*train) return cmd_train(train_args);
    if (*ablate) return cmd_ablate(ablate_args, grid);
    if (*evaluate) return cmd_evaluate(ckpt, eval_paths, report_out);
    if (*exportf) return cmd_export(feat_ckpt, feat_data, feat_out, teacher);
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
