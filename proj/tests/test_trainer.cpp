#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "mtda/errors.hpp"
#include "mtda/trainer.hpp"

using namespace mtda;
using testing::noise_dataset;

namespace {

TrainData tiny_data(std::size_t n_targets, std::uint64_t seed = 1) {
  TrainData d;
  d.source = noise_dataset(24, seed, "src");
  for (std::size_t i = 0; i < n_targets; ++i) {
    const std::string id = "t" + std::to_string(i);
    d.targets.push_back(noise_dataset(20 + 4 * i, seed + 10 + i, id, 8, 3, false));
    d.eval_sets.push_back(noise_dataset(10, seed + 20 + i, id));
  }
  return d;
}

TrainConfig tiny_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 2;
  c.batch_size = 8;
  c.uda_learning_rate = 0.01;
  c.kd_learning_rate = 0.01;
  c.weights.tau = 4.0;
  c.teacher_feature_dim = 8;
  c.student_feature_dim = 6;
  c.seed = 5;
  return c;
}

std::vector<std::uint64_t> teacher_checksums(const RunState& s) {
  std::vector<std::uint64_t> out;
  for (const Learner& t : s.teachers) out.push_back(parameter_checksum(t.net));
  return out;
}

struct CountingLog : RunLog {
  std::size_t steps = 0, epochs = 0;
  void step(const StepRecord&) override { ++steps; }
  void epoch(const EpochSnapshot&) override { ++epochs; }
};

}  // namespace

TEST_CASE("fuse_logits examples") {
  const std::vector<Tensor> logits{Tensor({1, 2}, std::vector<double>{2, 0}), Tensor({1, 2}, std::vector<double>{0, 2})};
  CHECK(fuse_logits(logits, Fusion::mean) == Tensor({1, 2}, std::vector<double>{1, 1}));
  CHECK(fuse_logits(logits, Fusion::sum) == Tensor({1, 2}, std::vector<double>{2, 2}));
  CHECK_THROWS_AS(fuse_logits(std::vector<Tensor>{}, Fusion::sum), ArgumentError);
}

TEST_CASE("step accounting per mode") {
  const auto data = tiny_data(3);
  const std::size_t batches_per_epoch = 3;  // ceil(24 / 8)
  const std::size_t B = 2 * batches_per_epoch;

  CountingLog log;
  const auto mt = train(tiny_config(TrainMode::mt_mtda), data, &log);
  CHECK(mt.teachers.size() == 3);
  CHECK(mt.counters.da_steps == 3 * B);
  CHECK(mt.counters.kd_steps() == 2 * 3 * B);
  CHECK(mt.counters.kd_source_steps == mt.counters.kd_target_steps);
  CHECK(log.steps == 3 * B);
  CHECK(log.epochs == 2);
  CHECK(mt.history.size() == 2);
  CHECK(mt.history.back().counters == mt.counters);

  const auto fusion = train(tiny_config(TrainMode::fusion_mean), data);
  CHECK(fusion.counters.da_steps == 3 * B);
  CHECK(fusion.counters.kd_source_steps == B);
  CHECK(fusion.counters.kd_target_steps == 3 * B);

  const auto stm = train(tiny_config(TrainMode::single_teacher_mixed), data);
  CHECK(stm.teachers.size() == 1);
  CHECK(stm.counters.da_steps == B);

  auto mixed_cfg = tiny_config(TrainMode::mt_mtda_mixed);
  mixed_cfg.k_splits = 2;
  CHECK(train(mixed_cfg, data).teachers.size() == 2);

  const auto so = train(tiny_config(TrainMode::source_only), data);
  CHECK(so.teachers.empty());
  CHECK(so.counters.source_ce_steps == B);
  CHECK(so.counters.da_steps == 0);
}

TEST_CASE("teachers are isolated from the student and from each other") {
  const auto data = tiny_data(2);
  auto cfg = tiny_config(TrainMode::mt_mtda);
  const auto base = teacher_checksums(train(cfg, data));

  cfg.kd_learning_rate = 0.05;
  CHECK(teacher_checksums(train(cfg, data)) == base);
  cfg.consistency_enabled = false;
  CHECK(teacher_checksums(train(cfg, data)) == base);

  auto other = data;
  other.targets[1] = noise_dataset(24, 99, "t1", 8, 3, false);
  other.eval_sets[1] = noise_dataset(10, 98, "t1");
  cfg = tiny_config(TrainMode::mt_mtda);
  const auto swapped = teacher_checksums(train(cfg, other));
  CHECK(swapped[0] == base[0]);
  CHECK(swapped[1] != base[1]);

  cfg.distill_updates_teacher = true;
  CHECK(teacher_checksums(train(cfg, data)) != base);
}

TEST_CASE("one target: multi-teacher, single-teacher and fusion runs coincide") {
  const auto data = tiny_data(1);
  const auto mt = train(tiny_config(TrainMode::mt_mtda), data);
  const auto st = train(tiny_config(TrainMode::single_teacher_mixed), data);
  const auto fm = train_fusion(tiny_config(TrainMode::mt_mtda), data, Fusion::mean);
  const auto fs = train_fusion(tiny_config(TrainMode::mt_mtda), data, Fusion::sum);
  CHECK(mt.history == st.history);
  CHECK(mt.history == fm.history);
  CHECK(mt.history == fs.history);
  CHECK(parameter_checksum(mt.student_learner().net) == parameter_checksum(st.student_learner().net));
  CHECK(parameter_checksum(mt.student_learner().net) == parameter_checksum(fm.student_learner().net));
}

TEST_CASE("training is deterministic for a fixed seed and varies with the seed") {
  const auto data = tiny_data(2);
  auto cfg = tiny_config(TrainMode::mt_mtda);
  const auto a = train(cfg, data), b = train(cfg, data);
  CHECK(a.history == b.history);
  CHECK(parameter_checksum(a.student_learner().net) == parameter_checksum(b.student_learner().net));
  cfg.seed = 6;
  CHECK(parameter_checksum(train(cfg, data).student_learner().net) !=
        parameter_checksum(a.student_learner().net));
}

TEST_CASE("stopping and continuing reproduces an uninterrupted run") {
  const auto data = tiny_data(2);
  auto cfg = tiny_config(TrainMode::mt_mtda);
  cfg.epochs = 3;
  const auto full = train(cfg, data);
  RunState part = initialize_run(cfg, data.source, training_targets(cfg, data.targets));
  run_epochs(part, data, nullptr, 1);
  CHECK(part.epoch == 1);
  RunState copy = part;
  run_epochs(copy, data);
  CHECK(copy.history == full.history);
  CHECK(parameter_checksum(copy.student_learner().net) == parameter_checksum(full.student_learner().net));
}

TEST_CASE("target order permutes the teachers") {
  const auto data = tiny_data(2);
  auto cfg = tiny_config(TrainMode::mt_mtda);
  const auto listed = teacher_checksums(train(cfg, data));
  cfg.target_order = {1, 0};
  const auto s = train(cfg, data);
  CHECK(s.training_target_ids == std::vector<std::string>{"t1", "t0"});
  // Each target keeps its own teacher draw, so its teacher is unchanged.
  CHECK(teacher_checksums(s) == std::vector<std::uint64_t>{listed[1], listed[0]});
  cfg.target_order = {0, 0};
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
}

TEST_CASE("divergence is reported, not silently continued") {
  const auto data = tiny_data(1);
  auto cfg = tiny_config(TrainMode::mt_mtda);
  cfg.uda_learning_rate = 1e6;
  cfg.kd_learning_rate = 1e6;
  std::ostringstream out;
  JsonlRunLog log(out);
  CHECK_THROWS_AS(train(cfg, data, &log), DivergenceError);
  CHECK(out.str().find("\"divergence\"") != std::string::npos);
}

TEST_CASE("configuration validation") {
  const auto data = tiny_data(1);
  auto cfg = tiny_config(TrainMode::fusion_sum);
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
  cfg = tiny_config(TrainMode::mt_mtda_mixed);
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
  cfg = tiny_config(TrainMode::mt_mtda);
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
  cfg = tiny_config(TrainMode::mt_mtda);
  cfg.s = 0.0;
  CHECK_THROWS_AS(train(cfg, data), ConfigError);
  CHECK_THROWS_AS(train(tiny_config(TrainMode::mt_mtda), tiny_data(0)), ConfigError);
  CHECK_THROWS_AS(parse_train_mode("dann"), ConfigError);
}

TEST_CASE("targets reach the trainer without labels") {
  auto data = tiny_data(2);
  data.targets[0] = noise_dataset(20, 3, "t0", 8, 3, true);
  const auto targets = training_targets(tiny_config(TrainMode::mt_mtda), data.targets);
  for (const auto& t : targets) CHECK_FALSE(t.has_labels());
}
