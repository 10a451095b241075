#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mtda/errors.hpp"
#include "mtda/models.hpp"

using namespace mtda;
using testing::random_tensor;

TEST_CASE("temperature softmax worked example") {
  const std::vector<double> z{2.0, 0.0};
  const auto p = temperature_softmax(z, 2.0);
  CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("temperature softmax properties over random logits") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 12);
    std::vector<double> z(n);
    for (auto& v : z) v = uniform(rng, -50.0, 50.0);
    const double tau = uniform(rng, 0.05, 40.0);
    const auto p = temperature_softmax(z, tau);
    double sum = 0.0;
    for (double v : p) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
    const double c = uniform(rng, -100.0, 100.0);
    std::vector<double> shifted = z;
    for (auto& v : shifted) v += c;
    const auto q = temperature_softmax(shifted, tau);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-6);
  }
}

TEST_CASE("temperature softmax limits and errors") {
  const std::vector<double> z{3.0, 1.0, -2.0};
  const auto hot = temperature_softmax(z, 1e6);
  for (double v : hot) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  const auto cold = temperature_softmax(z, 1e-3);
  CHECK(cold[0] == doctest::Approx(1.0));
  const std::vector<double> big{1000.0, 0.0};
  CHECK(temperature_softmax(big, 1.0)[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(temperature_softmax(z, 0.0), ArgumentError);
  CHECK_THROWS_AS(temperature_softmax(z, -1.0), ArgumentError);
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(temperature_softmax(bad, 1.0), NumericError);
}

TEST_CASE("gradient reversal example and identity forward") {
  const Tensor g({1, 2}, std::vector<double>{1.0, -2.0});
  CHECK(grl_backward(g, 0.5) == Tensor({1, 2}, std::vector<double>{-0.5, 1.0}));
  Rng rng(2);
  const Tensor x = random_tensor({4, 3}, rng);
  CHECK(grl_apply(x, 0.7) == x);
  GradientReversal grl(2.0);
  CHECK(grl.forward(x) == x);
  const Tensor back = grl.backward(x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == -2.0 * x[i]);
  CHECK_THROWS_AS(GradientReversal(-1.0), ArgumentError);
}

TEST_CASE("presets: deterministic, teacher larger, small inputs rejected") {
  const ImageShape s32{32, 32, 3};
  const auto t = build_backbone(Preset::teacher_wide, s32, 10, 1);
  const auto s = build_backbone(Preset::student_compact, s32, 10, 1);
  CHECK(t.parameter_count() > s.parameter_count());
  CHECK(t.role() == Role::teacher);
  CHECK(s.role() == Role::student);
  CHECK(parameter_checksum(build_backbone(Preset::student_compact, s32, 10, 5)) ==
        parameter_checksum(build_backbone(Preset::student_compact, s32, 10, 5)));
  CHECK(parameter_checksum(build_backbone(Preset::student_compact, s32, 10, 5)) !=
        parameter_checksum(build_backbone(Preset::student_compact, s32, 10, 6)));
  CHECK_THROWS_AS(build_backbone(Preset::student_compact, {4, 4, 3}, 10, 1), ConfigError);
  CHECK(build_backbone(Preset::teacher_wide, {16, 16, 3}, 10, 1, 32).feature_dim() == 32);
  CHECK_THROWS_AS(parse_preset("resnet50"), ConfigError);
}

TEST_CASE("network forward shapes and shape errors") {
  auto net = build_backbone(Preset::student_compact, {12, 12, 3}, 7, 3);
  Rng rng(3);
  const auto out = net.forward(random_tensor({5, 3, 12, 12}, rng, 0.0, 1.0));
  CHECK(out.features.shape() == std::vector<std::size_t>{5, net.feature_dim()});
  CHECK(out.logits.shape() == std::vector<std::size_t>{5, 7});
  CHECK_THROWS_AS(net.forward(random_tensor({5, 1, 12, 12}, rng)), ShapeError);
}

TEST_CASE("network backward matches finite differences through both heads") {
  auto net = build_backbone(Preset::student_compact, {8, 8, 2}, 3, 4, 6);
  Rng rng(4);
  const Tensor x = random_tensor({2, 2, 8, 8}, rng, 0.0, 1.0);
  const auto out = net.forward(x);
  const Tensor wl = random_tensor(out.logits.shape(), rng), wf = random_tensor(out.features.shape(), rng);
  auto loss = [&] {
    const auto o = net.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < wl.size(); ++i) s += wl[i] * o.logits[i];
    for (std::size_t i = 0; i < wf.size(); ++i) s += wf[i] * o.features[i];
    return s;
  };
  net.zero_grad();
  net.forward(x);
  net.backward(wl, wf);
  for (Parameter* p : net.parameters()) {
    if (!p->trainable) continue;
    const Tensor g = p->grad;
    for (std::size_t i = 0; i < p->value.size(); i += std::max<std::size_t>(1, p->value.size() / 7)) {
      INFO(p->name);
      CHECK(testing::rel_error(testing::central_difference(loss, p->value[i]), g[i]) < 1e-5);
    }
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  const Tensor z({2, 3}, std::vector<double>{1, 3, 3, 0, 0, 0});
  CHECK(argmax_rows(z) == std::vector<int>{1, 0});
}

TEST_CASE("domain classifier maps features to two logits") {
  DomainClassifier d(8, 1);
  Rng rng(5);
  CHECK(d.forward(random_tensor({3, 8}, rng)).shape() == std::vector<std::size_t>{3, 2});
  CHECK_THROWS_AS(d.forward(random_tensor({3, 7}, rng)), ShapeError);
  CHECK(parameter_checksum(d) == parameter_checksum(DomainClassifier(8, 1)));
}

TEST_CASE("chunked prediction equals one-shot prediction") {
  const auto data = testing::noise_dataset(37, 9, "n", 8, 3);
  auto net = build_backbone(Preset::student_compact, data.shape(), 10, 2);
  const auto all = predict(net, data.all_images());
  CHECK(predict(net, data, 5) == all);
  const Tensor chunked = extract_features(net, data, 4), whole = net.forward(data.all_images()).features;
  REQUIRE(chunked.shape() == whole.shape());
  for (std::size_t i = 0; i < whole.size(); ++i) CHECK(std::abs(chunked[i] - whole[i]) < 1e-12);
}

TEST_CASE("gradient reversal inside a small pipeline matches reversed finite differences") {
  // x -> Linear(2,3) -> GRL(lambda) -> Linear(3,1) -> sum: 13 parameters.
  Rng rng(6);
  Linear first(2, 3, rng), second(3, 1, rng);
  const Tensor x = random_tensor({4, 2}, rng);
  for (double lambda : {0.5, 1.0, 2.0}) {
    const GradientReversal grl(lambda);
    auto value = [&] {
      const Tensor y = second.forward(grl.forward(first.forward(x)));
      double s = 0.0;
      for (double v : y.values()) s += v;
      return s;
    };
    for (Parameter* p : first.parameters()) p->zero_grad();
    for (Parameter* p : second.parameters()) p->zero_grad();
    const Tensor y = second.forward(grl.forward(first.forward(x)));
    first.backward(grl.backward(second.backward(Tensor(y.shape(), 1.0), true)), false);
    for (Parameter* p : second.parameters())
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const Tensor g = p->grad;
        CHECK(testing::rel_error(testing::central_difference(value, p->value[i]), g[i]) < 1e-3);
      }
    for (Parameter* p : first.parameters())
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const Tensor g = p->grad;
        CHECK(testing::rel_error(-lambda * testing::central_difference(value, p->value[i]), g[i]) < 1e-3);
      }
  }
}

TEST_CASE("two-parameter pipeline: reversed gradient in closed form") {
  // loss = v * (w * x), GRL between the two factors.
  Parameter w, v;
  w.value = Tensor({1}, 0.7);
  v.value = Tensor({1}, -1.3);
  const double x = 2.0, lambda = 0.8;
  auto value = [&] { return v.value[0] * (w.value[0] * x); };
  const double dv = w.value[0] * x;
  const double dw = grl_backward(Tensor({1, 1}, v.value[0]), lambda)[0] * x;
  CHECK(testing::rel_error(testing::central_difference(value, v.value[0]), dv) < 1e-3);
  CHECK(testing::rel_error(-lambda * testing::central_difference(value, w.value[0]), dw) < 1e-3);
}
