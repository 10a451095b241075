#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mtda/rng.hpp"
#include "mtda/tensor.hpp"

namespace mtda {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Buffers (e.g. standardization constants) are saved but never optimized.
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

// A differentiable layer with manual backprop. forward() caches whatever
// backward() needs, so calls must alternate forward/backward per batch.
// backward() accumulates into parameter gradients.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  // When need_input_grad is false the returned tensor may be empty.
  virtual Tensor backward(const Tensor& grad_out, bool need_input_grad) = 0;

  virtual std::vector<Parameter*> parameters() { return {}; }
  // Per-sample output shape for a per-sample input shape.
  virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string kind() const override { return "linear"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

 private:
  std::size_t in_, out_;
  Parameter weight_;  // out x in
  Parameter bias_;
  Tensor input_;
};

// Stride-1 square convolution with symmetric zero padding, via im2col + GEMM.
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding,
         Rng& rng);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string kind() const override { return "conv"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  std::size_t in_c_, out_c_, k_, pad_;
  Parameter weight_;  // out x (in*k*k)
  Parameter bias_;
  std::vector<std::size_t> in_shape_;
  MatrixRM cols_;  // (in*k*k) x (B*Ho*Wo)
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Tensor output_;
};

// 2x2 max pooling, stride 2; odd trailing rows/cols are dropped.
class MaxPool2 final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string kind() const override { return "maxpool"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }

 private:
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::string kind() const override { return "flatten"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  std::vector<std::size_t> in_shape_;
};

// Per-channel (x - mean) / std on NCHW input. Constants are buffers.
class Standardize final : public Layer {
 public:
  explicit Standardize(std::size_t channels);

  void set_statistics(const std::vector<double>& mean, const std::vector<double>& stddev);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out, bool need_input_grad) override;
  std::vector<Parameter*> parameters() override { return {&mean_, &std_}; }
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    return in;
  }
  std::string kind() const override { return "standardize"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Standardize>(*this); }

 private:
  Parameter mean_;
  Parameter std_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = false);

  // Named as "<index>.<kind>.<slot>", stable for checkpoints.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<std::size_t> output_shape(std::vector<std::size_t> in) const;
  std::size_t parameter_count() const;  // trainable scalars only
  void zero_grad();

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace mtda
