#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/rng.hpp"
#include "mtda/tensor.hpp"

namespace testing {

inline mtda::Tensor random_tensor(std::vector<std::size_t> shape, mtda::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  mtda::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = mtda::uniform(rng, lo, hi);
  return t;
}

// Central finite difference of f at x along coordinate i.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double old = x;
  x = old + h;
  const double fp = f();
  x = old - h;
  const double fm = f();
  x = old;
  return (fp - fm) / (2.0 * h);
}

inline double rel_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

// Small labeled dataset with random pixels (values in [0,1]).
inline mtda::DomainDataset noise_dataset(std::size_t n, std::uint64_t seed, std::string id = "noise",
                                         std::size_t size = 8, std::size_t channels = 3, bool labeled = true) {
  mtda::Rng rng(seed);
  mtda::ImageShape shape{size, size, channels};
  std::vector<float> px(n * shape.pixels());
  for (auto& v : px) v = static_cast<float>(mtda::uniform01(rng));
  std::optional<std::vector<int>> labels;
  if (labeled) {
    labels.emplace(n);
    for (std::size_t i = 0; i < n; ++i) (*labels)[i] = static_cast<int>(i % 10);
  }
  return mtda::DomainDataset(std::move(id), 10, shape, std::move(px), std::move(labels));
}

}  // namespace testing
