#include <doctest.h>

#include "mtda/config.hpp"
#include "mtda/errors.hpp"

using namespace mtda;

TEST_CASE("manifest parsing resolves paths and reads every section") {
  const std::string text =
      "[train]\nmode = fusion_sum\nepochs = 12\ntau = 4\nalpha = 0.25\ntarget_order = 2,0,1\n"
      "consistency_enabled = false\nkd_convention = both_tempered_scaled\n"
      "[data]\nsource = data/src\ntargets = data/a, data/b, /abs/c\n"
      "[run]\noutput_dir = out\nreplications = 2\n";
  const auto m = parse_manifest(text, "/base");
  CHECK(m.config.mode == TrainMode::fusion_sum);
  CHECK(m.config.epochs == 12);
  CHECK(m.config.weights.tau == 4.0);
  CHECK(m.config.weights.alpha == 0.25);
  CHECK(m.config.target_order == std::vector<std::size_t>{2, 0, 1});
  CHECK_FALSE(m.config.consistency_enabled);
  CHECK(m.config.kd_convention == KdConvention::both_tempered_scaled);
  CHECK(m.source == std::filesystem::path("/base/data/src"));
  REQUIRE(m.targets.size() == 3);
  CHECK(m.targets[1] == std::filesystem::path("/base/data/b"));
  CHECK(m.targets[2] == std::filesystem::path("/abs/c"));
  CHECK(m.output_dir == std::filesystem::path("/base/out"));
  CHECK(m.replications == 2);
}

TEST_CASE("unknown keys and sections are rejected") {
  CHECK_THROWS_AS(parse_manifest("[train]\nlearning_rate = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("[data]\nsources = x\n"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("[model]\nwidth = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("epochs = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("[train]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("[train]\nmode = dann\n"), ConfigError);
  CHECK_THROWS_AS(parse_manifest("[run]\nreplications = 0\n"), ConfigError);
  auto doc = config_to_json(TrainConfig{});
  doc["typo"] = 1;
  CHECK_THROWS_AS(config_from_json(doc), ConfigError);
}

TEST_CASE("INI echo round trip") {
  RunManifest m;
  m.config.mode = TrainMode::mt_mtda_mixed;
  m.config.k_splits = 3;
  m.config.weights.gamma = 0.123456789012345;
  m.config.uda_learning_rate = 1.0 / 3.0;
  m.config.seed = 18446744073709551615ull;
  m.config.beta_granularity = BetaGranularity::batch;
  m.config.teacher_feature_dim = 40;
  m.source = "/d/src";
  m.targets = {"/d/a", "/d/b"};
  m.eval = {"/d/ea", "/d/eb"};
  m.output_dir = "/o";
  m.replications = 5;
  const auto back = parse_manifest(manifest_to_ini(m));
  CHECK(config_to_json(back.config) == config_to_json(m.config));
  CHECK(back.targets == m.targets);
  CHECK(back.eval == m.eval);
  CHECK(back.output_dir == m.output_dir);
  CHECK(back.replications == 5);
  CHECK(manifest_to_ini(back) == manifest_to_ini(m));
}

TEST_CASE("JSON config round trip and overrides") {
  TrainConfig c;
  c.target_order = {1, 0};
  c.distill_updates_teacher = true;
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
  apply_train_key(c, "epochs", "7");
  apply_train_key(c, "student_preset", "teacher_wide");
  apply_train_key(c, "k_splits", "none");
  CHECK(c.epochs == 7);
  CHECK(c.student_preset == Preset::teacher_wide);
  CHECK_FALSE(c.k_splits.has_value());
  CHECK_THROWS_AS(apply_train_key(c, "unknown", "1"), ConfigError);
  CHECK_THROWS_AS(apply_train_key(c, "consistency_enabled", "maybe"), ConfigError);
  CHECK(format_double(0.1) == "0.1");
}
