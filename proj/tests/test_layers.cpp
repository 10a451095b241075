#include <doctest.h>

#include "helpers.hpp"
#include "mtda/errors.hpp"
#include "mtda/layers.hpp"

using namespace mtda;
using testing::central_difference;
using testing::random_tensor;
using testing::rel_error;

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Checks parameter and input gradients of L = <w, layer(x)> against
// central differences.
void check_gradients(Sequential& net, Tensor x, double tol = 1e-6) {
  Rng rng(99);
  const Tensor y = net.forward(x);
  const Tensor w = random_tensor(y.shape(), rng);
  net.zero_grad();
  const Tensor gx = net.backward(w, true);
  auto loss = [&] { return dot(w, net.forward(x)); };

  for (Parameter* p : net.parameters()) {
    if (!p->trainable) continue;
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); i += std::max<std::size_t>(1, p->value.size() / 17)) {
      const double fd = central_difference(loss, p->value[i]);
      INFO(p->name << "[" << i << "]");
      CHECK(rel_error(fd, analytic[i]) < tol);
    }
  }
  for (std::size_t i = 0; i < x.size(); i += std::max<std::size_t>(1, x.size() / 23)) {
    const double fd = central_difference(loss, x[i]);
    INFO("input[" << i << "]");
    CHECK(rel_error(fd, gx[i]) < tol);
  }
}

}  // namespace

TEST_CASE("linear gradients match finite differences") {
  Rng rng(1);
  Sequential net;
  net.emplace<Linear>(5, 4, rng);
  check_gradients(net, random_tensor({3, 5}, rng));
}

TEST_CASE("conv gradients match finite differences") {
  Rng rng(2);
  for (std::size_t pad : {0u, 1u, 2u}) {
    Sequential net;
    net.emplace<Conv2d>(2, 3, 3, pad, rng);
    check_gradients(net, random_tensor({2, 2, 6, 5}, rng));
  }
}

TEST_CASE("conv forward matches a direct convolution") {
  Rng rng(3);
  Conv2d conv(2, 2, 3, 1, rng);
  const Tensor x = random_tensor({1, 2, 4, 4}, rng);
  const Tensor y = conv.forward(x);
  Parameter* w = conv.parameters()[0];
  Parameter* b = conv.parameters()[1];
  for (std::size_t o = 0; o < 2; ++o)
    for (long oy = 0; oy < 4; ++oy)
      for (long ox = 0; ox < 4; ++ox) {
        double acc = b->value[o];
        for (std::size_t c = 0; c < 2; ++c)
          for (long ki = 0; ki < 3; ++ki)
            for (long kj = 0; kj < 3; ++kj) {
              const long iy = oy + ki - 1, ix = ox + kj - 1;
              if (iy < 0 || iy >= 4 || ix < 0 || ix >= 4) continue;
              acc += w->value[((o * 2 + c) * 3 + static_cast<std::size_t>(ki)) * 3 + static_cast<std::size_t>(kj)] *
                     x[(c * 4 + static_cast<std::size_t>(iy)) * 4 + static_cast<std::size_t>(ix)];
            }
        CHECK(y[(o * 4 + static_cast<std::size_t>(oy)) * 4 + static_cast<std::size_t>(ox)] == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("pooling, rectifier and flatten gradients") {
  Rng rng(4);
  Sequential net;
  net.emplace<Conv2d>(1, 2, 3, 1, rng).emplace<Relu>().emplace<MaxPool2>().emplace<Flatten>().emplace<Linear>(8, 3, rng);
  check_gradients(net, random_tensor({2, 1, 4, 4}, rng), 1e-5);
}

TEST_CASE("maxpool keeps the window maximum") {
  MaxPool2 pool;
  Tensor x({1, 1, 2, 2}, std::vector<double>{1, 5, 3, 2});
  const Tensor y = pool.forward(x);
  CHECK(y.size() == 1);
  CHECK(y[0] == 5.0);
  const Tensor g = pool.backward(Tensor({1, 1, 1, 1}, 2.0), true);
  CHECK(g == Tensor({1, 1, 2, 2}, std::vector<double>{0, 2, 0, 0}));
}

TEST_CASE("standardize applies per-channel constants and is not trainable") {
  Standardize st(2);
  st.set_statistics({0.5, 1.0}, {2.0, 4.0});
  Tensor x({1, 2, 1, 2}, std::vector<double>{1.5, 2.5, 1.0, 5.0});
  const Tensor y = st.forward(x);
  CHECK(y == Tensor({1, 2, 1, 2}, std::vector<double>{0.5, 1.0, 0.0, 1.0}));
  for (Parameter* p : st.parameters()) CHECK_FALSE(p->trainable);
  CHECK_THROWS_AS(st.set_statistics({0.0, 0.0}, {1.0, 0.0}), ArgumentError);
}

TEST_CASE("sequential copies are deep and parameter names are stable") {
  Rng rng(5);
  Sequential a;
  a.emplace<Linear>(3, 2, rng).emplace<Relu>().emplace<Linear>(2, 2, rng);
  Sequential b = a;
  b.parameters()[0]->value[0] += 1.0;
  CHECK(a.parameters()[0]->value[0] != b.parameters()[0]->value[0]);
  std::vector<std::string> names;
  for (auto* p : a.parameters()) names.push_back(p->name);
  CHECK(names == std::vector<std::string>{"0.linear.weight", "0.linear.bias", "2.linear.weight", "2.linear.bias"});
  CHECK(a.parameter_count() == 3 * 2 + 2 + 2 * 2 + 2);
}

TEST_CASE("shape errors are explicit") {
  Rng rng(6);
  Linear lin(4, 2, rng);
  CHECK_THROWS_AS(lin.forward(Tensor({2, 3})), ShapeError);
  Conv2d conv(3, 2, 3, 0, rng);
  CHECK_THROWS_AS(conv.forward(Tensor({1, 2, 5, 5})), ShapeError);
}
