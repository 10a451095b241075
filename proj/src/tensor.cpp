#include "mtda/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "mtda/errors.hpp"

namespace mtda {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, const std::vector<double>& values)
    : Tensor(std::move(shape), Storage(values.begin(), values.end())) {}

Tensor::Tensor(std::vector<std::size_t> shape, Storage values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_))
    throw ShapeError("tensor value count " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
}

std::size_t Tensor::row_size() const {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t n = row_size();
  return {data_.data() + r * n, n};
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t n = row_size();
  return {data_.data() + r * n, n};
}

MatMap Tensor::matrix() {
  return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(row_size())};
}

ConstMatMap Tensor::matrix() const {
  return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(row_size())};
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows())
    throw ShapeError("row slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_string());
  std::vector<std::size_t> shape = shape_;
  shape[0] = end - begin;
  const std::size_t n = row_size();
  Storage values(data_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                             data_.begin() + static_cast<std::ptrdiff_t>(end * n));
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::concat_rows(const Tensor& a, const Tensor& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.rank() != b.rank() || !std::equal(a.shape_.begin() + 1, a.shape_.end(), b.shape_.begin() + 1))
    throw ShapeError("cannot concatenate " + a.shape_string() + " and " + b.shape_string());
  std::vector<std::size_t> shape = a.shape_;
  shape[0] = a.rows() + b.rows();
  Storage values;
  values.reserve(a.size() + b.size());
  values.insert(values.end(), a.data_.begin(), a.data_.end());
  values.insert(values.end(), b.data_.begin(), b.data_.end());
  return Tensor(std::move(shape), std::move(values));
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

}  // namespace mtda
