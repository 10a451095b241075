#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "mtda/errors.hpp"
#include "mtda/metrics.hpp"
#include "mtda/trainer.hpp"

using namespace mtda;
namespace fs = std::filesystem;

TEST_CASE("equal-weight accuracy example") {
  const std::vector<double> accs{34.1, 52.6, 59.7};
  CHECK(std::abs(equal_weight_accuracy(accs) - 48.8) <= 0.05);
  CHECK(round1(equal_weight_accuracy(accs)) == doctest::Approx(48.8));
  CHECK_THROWS_AS(equal_weight_accuracy(std::vector<double>{}), ArgumentError);
}

TEST_CASE("weighted accuracy example and identities") {
  CHECK(weighted_accuracy(std::vector<double>{100.0, 0.0}, std::vector<std::size_t>{1, 3}) ==
        doctest::Approx(25.0).epsilon(1e-12));
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 6);
    std::vector<double> accs(n);
    for (auto& a : accs) a = uniform(rng, 0, 100);
    const std::vector<std::size_t> equal(n, 1 + uniform_index(rng, 500));
    CHECK(std::abs(weighted_accuracy(accs, equal) - equal_weight_accuracy(accs)) < 1e-9);
    std::vector<std::size_t> counts(n, 0);
    const std::size_t k = uniform_index(rng, n);
    counts[k] = 1 + uniform_index(rng, 50);
    for (std::size_t i = 0; i < n; ++i)
      if (i != k) counts[i] = 1;
    double lo = 100, hi = 0;
    for (double a : accs) lo = std::min(lo, a), hi = std::max(hi, a);
    const double w = weighted_accuracy(accs, counts);
    CHECK(w >= lo - 1e-9);
    CHECK(w <= hi + 1e-9);
  }
  CHECK_THROWS_AS(weighted_accuracy(std::vector<double>{1.0}, std::vector<std::size_t>{1, 2}), ArgumentError);
  CHECK_THROWS_AS(weighted_accuracy(std::vector<double>{1.0}, std::vector<std::size_t>{0}), ArgumentError);
}

TEST_CASE("accuracy requires labels") {
  auto net = build_backbone(Preset::student_compact, {8, 8, 3}, 10, 1);
  const auto labeled = testing::noise_dataset(20, 1);
  const double a = accuracy(net, labeled);
  CHECK(a >= 0.0);
  CHECK(a <= 100.0);
  CHECK_THROWS_AS(accuracy(net, labeled.without_labels()), ArgumentError);
}

TEST_CASE("cosine domain shift properties") {
  Rng rng(5);
  const Tensor a = testing::random_tensor({6, 4}, rng), b = testing::random_tensor({5, 4}, rng);
  CHECK(std::abs(cosine_domain_shift(a, a)) < 1e-12);
  CHECK(cosine_domain_shift(a, b) == doctest::Approx(cosine_domain_shift(b, a)).epsilon(1e-12));
  Tensor scaled = b;
  for (auto& v : scaled.values()) v *= 3.7;
  CHECK(cosine_domain_shift(a, scaled) == doctest::Approx(cosine_domain_shift(a, b)).epsilon(1e-9));
  Tensor neg = a;
  for (auto& v : neg.values()) v = -v;
  CHECK(cosine_domain_shift(a, neg) == doctest::Approx(2.0));
  const Tensor x({1, 2}, std::vector<double>{1, 0}), y({1, 2}, std::vector<double>{0, 1});
  CHECK(cosine_domain_shift(x, y) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_domain_shift(Tensor({1, 2}), x), UndefinedValueError);
  CHECK_THROWS_AS(cosine_domain_shift(x, Tensor({1, 3}, 1.0)), ShapeError);
}

TEST_CASE("feature export round trip") {
  const fs::path dir = fs::temp_directory_path() / "mtda_test_metrics";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto net = build_backbone(Preset::student_compact, {8, 8, 3}, 10, 2, 5);
  const auto data = testing::noise_dataset(7, 3, "dom");
  export_features(net, data, dir / "f.csv");
  const auto rows = read_feature_file(dir / "f.csv");
  const Tensor feats = extract_features(net, data);
  REQUIRE(rows.size() == 7);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].domain_id == "dom");
    CHECK(rows[i].label == data.label(i));
    REQUIRE(rows[i].features.size() == 5);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(rows[i].features[j] - feats.row(i)[j]) < 1e-6);
  }
  export_features(net, data.without_labels(), dir / "u.csv");
  CHECK_FALSE(read_feature_file(dir / "u.csv").front().label.has_value());
  std::ofstream(dir / "bad.csv") << "nonsense\n1,2\n";
  CHECK_THROWS_AS(read_feature_file(dir / "bad.csv"), FormatError);
}

TEST_CASE("report JSON round trip and schema check") {
  const std::vector<TargetAccuracy> rows{{"a", 50.0, 100}, {"b", 70.0, 300}};
  MetricsReport r = make_report(rows);
  CHECK(r.equal_weight == doctest::Approx(60.0));
  CHECK(r.weighted == doctest::Approx(65.0));
  CHECK_FALSE(r.weighted_equals_equal_weight());
  r.teacher_accuracies.push_back({0, "a", {55.0, 44.0}});
  r.run_metadata = {{"seed", 3}};
  const auto doc = report_to_json(r);
  const auto back = report_from_json(doc);
  CHECK(report_to_json(back) == doc);
  auto bad = doc;
  bad["schema_version"] = 99;
  CHECK_THROWS_AS(report_from_json(bad), FormatError);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"schema_version", 1}}), FormatError);
}

TEST_CASE("build_report names each teacher's training target") {
  TrainData d;
  d.source = testing::noise_dataset(16, 1, "src");
  d.targets = {testing::noise_dataset(16, 2, "x", 8, 3, false), testing::noise_dataset(16, 3, "y", 8, 3, false)};
  d.eval_sets = {testing::noise_dataset(8, 4, "x"), testing::noise_dataset(8, 5, "y")};
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 8;
  c.target_order = {1, 0};
  RunState s = train(c, d);
  const auto r = build_report(s, d.eval_sets);
  REQUIRE(r.teacher_accuracies.size() == 2);
  CHECK(r.teacher_accuracies[0].trained_on == "y");
  CHECK(r.teacher_accuracies[1].trained_on == "x");
  CHECK(r.per_target[0].domain_id == "x");
  CHECK(r.weighted_equals_equal_weight());
  CHECK(r.weighted == doctest::Approx(r.equal_weight).epsilon(1e-12));
}
