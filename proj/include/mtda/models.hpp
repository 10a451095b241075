#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/layers.hpp"
#include "mtda/tensor.hpp"

namespace mtda {

enum class Preset { student_compact, teacher_wide };
enum class Role { teacher, student };

std::string to_string(Preset p);
Preset parse_preset(const std::string& name);
std::string to_string(Role r);

// Softmax of logits / tau, max-subtracted. ArgumentError for tau <= 0,
// NumericError for non-finite logits.
std::vector<double> temperature_softmax(std::span<const double> logits, double tau);
// Row-wise over a B x C tensor.
Tensor temperature_softmax(const Tensor& logits, double tau);

// Identity forward; backward maps g to -lambda * g.
class GradientReversal {
 public:
  explicit GradientReversal(double lambda = 1.0);

  double lambda() const { return lambda_; }
  Tensor forward(const Tensor& x) const { return x; }
  Tensor backward(const Tensor& grad_out) const;

 private:
  double lambda_;
};

Tensor grl_apply(const Tensor& features, double lambda);
Tensor grl_backward(const Tensor& grad_out, double lambda);

struct NetOutput {
  Tensor features;  // B x F
  Tensor logits;    // B x C
};

// Feature extractor followed by a linear class head. The extractor begins
// with a per-channel standardization layer whose constants come from the
// source training split.
class ClassifierNetwork {
 public:
  ClassifierNetwork(Preset preset, Role role, ImageShape input_shape, std::size_t num_classes,
                    std::size_t feature_dim, std::uint64_t seed, Sequential features, Sequential head);

  NetOutput forward(const Tensor& images);
  // Either gradient may be empty (treated as zero). Accumulates into
  // parameter gradients; the input gradient is not computed.
  void backward(const Tensor& grad_logits, const Tensor& grad_features);

  Tensor logits(const Tensor& images) { return forward(images).logits; }

  void set_standardization(const std::vector<double>& mean, const std::vector<double>& stddev);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  Preset preset() const { return preset_; }
  Role role() const { return role_; }
  const ImageShape& input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Preset preset_;
  Role role_;
  ImageShape input_shape_;
  std::size_t num_classes_;
  std::size_t feature_dim_;
  std::uint64_t seed_;
  Sequential features_;
  Sequential head_;
};

// Binary source(0)/target(1) head, F -> F/2 -> 2 with a rectifier, meant to
// sit behind a GradientReversal of coefficient grl_lambda.
class DomainClassifier {
 public:
  DomainClassifier(std::size_t feature_dim, std::uint64_t seed, double grl_lambda = 1.0);

  Tensor forward(const Tensor& features);
  // Returns the gradient w.r.t. the (post-GRL) features.
  Tensor backward(const Tensor& grad_logits);

  std::vector<Parameter*> parameters() { return head_.parameters(); }
  std::vector<const Parameter*> parameters() const { return std::as_const(head_).parameters(); }
  void zero_grad() { head_.zero_grad(); }

  std::size_t feature_dim() const { return feature_dim_; }
  double grl_lambda() const { return grl_lambda_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t feature_dim_;
  double grl_lambda_;
  std::uint64_t seed_;
  Sequential head_;
};

std::size_t default_feature_dim(Preset preset);

// student_compact: 2 conv blocks (5x5, 4/8 channels) + 2 fully connected.
// teacher_wide: 4 conv blocks (3x3, 4x the student width) + 2 fully connected.
// feature_dim 0 selects the preset default. ConfigError when the input is
// too small for the preset's pooling.
ClassifierNetwork build_backbone(Preset preset, ImageShape input_shape, std::size_t num_classes,
                                 std::uint64_t seed, std::size_t feature_dim = 0);

// Argmax per row, ties resolved toward the lowest class index.
std::vector<int> argmax_rows(const Tensor& logits);
std::vector<int> predict(ClassifierNetwork& net, const Tensor& images);
// Whole-dataset prediction in fixed-size chunks.
std::vector<int> predict(ClassifierNetwork& net, const DomainDataset& data, std::size_t chunk = 256);
// Student features of every sample, B x F.
Tensor extract_features(ClassifierNetwork& net, const DomainDataset& data, std::size_t chunk = 256);

// FNV-1a over the raw bytes of every parameter value, in order.
std::uint64_t parameter_checksum(std::span<const Parameter* const> params);
std::uint64_t parameter_checksum(const ClassifierNetwork& net);
std::uint64_t parameter_checksum(const DomainClassifier& dclf);

}  // namespace mtda
