#include "mtda/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

std::string to_string(Preset p) {
  return p == Preset::student_compact ? "student_compact" : "teacher_wide";
}

Preset parse_preset(const std::string& name) {
  if (name == "student_compact") return Preset::student_compact;
  if (name == "teacher_wide") return Preset::teacher_wide;
  throw ConfigError("unknown backbone preset '" + name + "'");
}

std::string to_string(Role r) { return r == Role::teacher ? "teacher" : "student"; }

std::vector<double> temperature_softmax(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("temperature must be positive");
  if (logits.empty()) return {};
  for (double v : logits)
    if (!std::isfinite(v)) throw NumericError("non-finite logit");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp((logits[i] - mx) / tau);
  for (double& v : out) v /= sum;
  return out;
}

Tensor temperature_softmax(const Tensor& logits, double tau) {
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto p = temperature_softmax(logits.row(r), tau);
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

GradientReversal::GradientReversal(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("gradient reversal coefficient must be >= 0");
}

Tensor GradientReversal::backward(const Tensor& grad_out) const { return grl_backward(grad_out, lambda_); }

Tensor grl_apply(const Tensor& features, double lambda) { return GradientReversal(lambda).forward(features); }

Tensor grl_backward(const Tensor& grad_out, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("gradient reversal coefficient must be >= 0");
  Tensor g = grad_out;
  for (auto& v : g.values()) v *= -lambda;
  return g;
}

// --- ClassifierNetwork ----------------------------------------------------

ClassifierNetwork::ClassifierNetwork(Preset preset, Role role, ImageShape input_shape,
                                     std::size_t num_classes, std::size_t feature_dim,
                                     std::uint64_t seed, Sequential features, Sequential head)
    : preset_(preset),
      role_(role),
      input_shape_(input_shape),
      num_classes_(num_classes),
      feature_dim_(feature_dim),
      seed_(seed),
      features_(std::move(features)),
      head_(std::move(head)) {}

NetOutput ClassifierNetwork::forward(const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != input_shape_.channels || images.dim(2) != input_shape_.height ||
      images.dim(3) != input_shape_.width)
    throw ShapeError("network expects Bx" + std::to_string(input_shape_.channels) + "x" +
                     std::to_string(input_shape_.height) + "x" + std::to_string(input_shape_.width) +
                     " images, got " + images.shape_string());
  NetOutput out;
  out.features = features_.forward(images);
  out.logits = head_.forward(out.features);
  return out;
}

void ClassifierNetwork::backward(const Tensor& grad_logits, const Tensor& grad_features) {
  Tensor g;
  if (!grad_logits.empty()) g = head_.backward(grad_logits, true);
  if (!grad_features.empty()) {
    if (g.empty()) {
      g = grad_features;
    } else {
      if (g.size() != grad_features.size()) throw ShapeError("feature gradient shape mismatch");
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad_features[i];
    }
  }
  if (!g.empty()) features_.backward(g, false);
}

void ClassifierNetwork::set_standardization(const std::vector<double>& mean,
                                            const std::vector<double>& stddev) {
  auto* layer = dynamic_cast<Standardize*>(&features_.layer(0));
  if (!layer) throw ConfigError("network has no standardization layer");
  layer->set_statistics(mean, stddev);
}

std::vector<Parameter*> ClassifierNetwork::parameters() {
  auto p = features_.parameters();
  for (Parameter* q : head_.parameters()) p.push_back(q);
  return p;
}

std::vector<const Parameter*> ClassifierNetwork::parameters() const {
  auto p = features_.parameters();
  for (const Parameter* q : head_.parameters()) p.push_back(q);
  return p;
}

std::size_t ClassifierNetwork::parameter_count() const {
  return features_.parameter_count() + head_.parameter_count();
}

void ClassifierNetwork::zero_grad() {
  features_.zero_grad();
  head_.zero_grad();
}

// --- DomainClassifier -----------------------------------------------------

DomainClassifier::DomainClassifier(std::size_t feature_dim, std::uint64_t seed, double grl_lambda)
    : feature_dim_(feature_dim), grl_lambda_(grl_lambda), seed_(seed) {
  if (feature_dim < 2) throw ConfigError("domain classifier needs feature_dim >= 2");
  if (!(grl_lambda >= 0.0)) throw ArgumentError("gradient reversal coefficient must be >= 0");
  Rng rng(derive_seed(seed, 0xdc));
  head_.emplace<Linear>(feature_dim, feature_dim / 2, rng);
  head_.emplace<Relu>();
  head_.emplace<Linear>(feature_dim / 2, 2, rng);
}

Tensor DomainClassifier::forward(const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != feature_dim_)
    throw ShapeError("domain classifier expects Bx" + std::to_string(feature_dim_) + " features, got " +
                     features.shape_string());
  return head_.forward(features);
}

Tensor DomainClassifier::backward(const Tensor& grad_logits) { return head_.backward(grad_logits, true); }

// --- presets --------------------------------------------------------------

std::size_t default_feature_dim(Preset preset) { return preset == Preset::student_compact ? 64 : 128; }

ClassifierNetwork build_backbone(Preset preset, ImageShape input_shape, std::size_t num_classes,
                                 std::uint64_t seed, std::size_t feature_dim) {
  if (input_shape.channels == 0 || input_shape.height < 8 || input_shape.width < 8)
    throw ConfigError("input shape " + std::to_string(input_shape.height) + "x" +
                      std::to_string(input_shape.width) + "x" + std::to_string(input_shape.channels) +
                      " is too small for the convolutional presets (need >= 8x8)");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (feature_dim == 0) feature_dim = default_feature_dim(preset);
  Rng rng(derive_seed(seed, 0xbb, static_cast<std::uint64_t>(preset)));
  const std::size_t C = input_shape.channels;

  Sequential f;
  f.emplace<Standardize>(C);
  if (preset == Preset::student_compact) {
    f.emplace<Conv2d>(C, 4, 5, 2, rng).emplace<Relu>().emplace<MaxPool2>();
    f.emplace<Conv2d>(4, 8, 5, 2, rng).emplace<Relu>().emplace<MaxPool2>();
  } else {
    f.emplace<Conv2d>(C, 16, 3, 1, rng).emplace<Relu>().emplace<MaxPool2>();
    f.emplace<Conv2d>(16, 32, 3, 1, rng).emplace<Relu>().emplace<MaxPool2>();
    f.emplace<Conv2d>(32, 32, 3, 1, rng).emplace<Relu>();
    f.emplace<Conv2d>(32, 32, 3, 1, rng).emplace<Relu>();
  }
  f.emplace<Flatten>();
  const auto flat = f.output_shape({C, input_shape.height, input_shape.width});
  f.emplace<Linear>(flat[0], feature_dim, rng).emplace<Relu>();

  Sequential head;
  head.emplace<Linear>(feature_dim, num_classes, rng);

  const Role role = preset == Preset::teacher_wide ? Role::teacher : Role::student;
  return ClassifierNetwork(preset, role, input_shape, num_classes, feature_dim, seed, std::move(f),
                           std::move(head));
}

// --- inference ------------------------------------------------------------

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(ClassifierNetwork& net, const Tensor& images) { return argmax_rows(net.logits(images)); }

namespace {

template <typename Fn>
void for_each_chunk(const DomainDataset& data, std::size_t chunk, Fn&& fn) {
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, data.size());
    idx.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
    fn(data.batch_images(idx));
  }
}

}  // namespace

std::vector<int> predict(ClassifierNetwork& net, const DomainDataset& data, std::size_t chunk) {
  std::vector<int> out;
  out.reserve(data.size());
  for_each_chunk(data, chunk, [&](const Tensor& x) {
    const auto p = predict(net, x);
    out.insert(out.end(), p.begin(), p.end());
  });
  return out;
}

Tensor extract_features(ClassifierNetwork& net, const DomainDataset& data, std::size_t chunk) {
  Tensor out;
  for_each_chunk(data, chunk, [&](const Tensor& x) { out = Tensor::concat_rows(out, net.forward(x).features); });
  return out;
}

// --- checksums ------------------------------------------------------------

std::uint64_t parameter_checksum(std::span<const Parameter* const> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t parameter_checksum(const ClassifierNetwork& net) {
  const auto p = net.parameters();
  return parameter_checksum(p);
}

std::uint64_t parameter_checksum(const DomainClassifier& dclf) {
  const auto p = dclf.parameters();
  return parameter_checksum(p);
}

}  // namespace mtda
