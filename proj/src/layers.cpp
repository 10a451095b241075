#include "mtda/layers.hpp"

#include <cmath>
#include <limits>

#include "mtda/errors.hpp"

namespace mtda {

namespace {

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias.
Tensor fan_in_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -bound, bound);
  return t;
}

Parameter make_param(std::string name, Tensor value, bool trainable = true) {
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  return p;
}

void require_rank(const Tensor& x, std::size_t rank, const char* layer) {
  if (x.rank() != rank)
    throw ShapeError(std::string(layer) + " expects rank-" + std::to_string(rank) + " input, got " +
                     x.shape_string());
}

}  // namespace

// --- Linear ---------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : in_(in),
      out_(out),
      weight_(make_param("weight", fan_in_uniform({out, in}, in, rng))),
      bias_(make_param("bias", Tensor({out}))) {}

Tensor Linear::forward(const Tensor& x) {
  require_rank(x, 2, "linear");
  if (x.dim(1) != in_)
    throw ShapeError("linear expects " + std::to_string(in_) + " features, got " + x.shape_string());
  input_ = x;
  Tensor y({x.rows(), out_});
  auto Y = y.matrix();
  Y.noalias() = x.matrix() * weight_.value.matrix().transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.value.data(), static_cast<Eigen::Index>(out_));
  return y;
}

Tensor Linear::backward(const Tensor& grad_out, bool need_input_grad) {
  const auto G = grad_out.matrix();
  weight_.grad.matrix().noalias() += G.transpose() * input_.matrix();
  Eigen::Map<Eigen::RowVectorXd>(bias_.grad.data(), static_cast<Eigen::Index>(out_)) += G.colwise().sum();
  if (!need_input_grad) return {};
  Tensor gx({grad_out.rows(), in_});
  gx.matrix().noalias() = G * weight_.value.matrix();
  return gx;
}

std::vector<std::size_t> Linear::output_shape(const std::vector<std::size_t>& in) const {
  if (shape_numel(in) != in_) throw ShapeError("linear input size mismatch");
  return {out_};
}

// --- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t padding, Rng& rng)
    : in_c_(in_channels),
      out_c_(out_channels),
      k_(kernel),
      pad_(padding),
      weight_(make_param("weight", fan_in_uniform({out_channels, in_channels * kernel * kernel},
                                              in_channels * kernel * kernel, rng))),
      bias_(make_param("bias", Tensor({out_channels}))) {}

std::vector<std::size_t> Conv2d::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 3 || in[0] != in_c_)
    throw ShapeError("conv expects " + std::to_string(in_c_) + " input channels");
  if (in[1] + 2 * pad_ < k_ || in[2] + 2 * pad_ < k_) throw ShapeError("conv input smaller than kernel");
  return {out_c_, in[1] + 2 * pad_ - k_ + 1, in[2] + 2 * pad_ - k_ + 1};
}

Tensor Conv2d::forward(const Tensor& x) {
  require_rank(x, 4, "conv");
  const auto os = output_shape({x.dim(1), x.dim(2), x.dim(3)});
  const std::size_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = os[1], Wo = os[2], hw = Ho * Wo;
  in_shape_ = x.shape();

  cols_.setZero(static_cast<Eigen::Index>(in_c_ * k_ * k_), static_cast<Eigen::Index>(B * hw));
  const long p = static_cast<long>(pad_);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < in_c_; ++c) {
      const double* plane = x.data() + (b * in_c_ + c) * H * W;
      for (std::size_t ki = 0; ki < k_; ++ki) {
        for (std::size_t kj = 0; kj < k_; ++kj) {
          double* dst = cols_.data() + ((c * k_ + ki) * k_ + kj) * B * hw + b * hw;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const long iy = static_cast<long>(oy + ki) - p;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            const double* src = plane + static_cast<std::size_t>(iy) * W;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const long ix = static_cast<long>(ox + kj) - p;
              if (ix >= 0 && ix < static_cast<long>(W)) dst[oy * Wo + ox] = src[ix];
            }
          }
        }
      }
    }
  }

  MatrixRM out2 = weight_.value.matrix() * cols_;  // O x (B*hw)
  Tensor y({B, out_c_, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out_c_; ++o) {
      const double* src = out2.data() + o * B * hw + b * hw;
      double* dst = y.data() + (b * out_c_ + o) * hw;
      const double bias = bias_.value[o];
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + bias;
    }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, bool need_input_grad) {
  const std::size_t B = in_shape_[0], H = in_shape_[2], W = in_shape_[3];
  const std::size_t Ho = grad_out.dim(2), Wo = grad_out.dim(3), hw = Ho * Wo;

  MatrixRM g2(static_cast<Eigen::Index>(out_c_), static_cast<Eigen::Index>(B * hw));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out_c_; ++o) {
      const double* src = grad_out.data() + (b * out_c_ + o) * hw;
      double* dst = g2.data() + o * B * hw + b * hw;
      double sum = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        dst[i] = src[i];
        sum += src[i];
      }
      bias_.grad[o] += sum;
    }
  weight_.grad.matrix().noalias() += g2 * cols_.transpose();
  if (!need_input_grad) return {};

  const MatrixRM dcols = weight_.value.matrix().transpose() * g2;
  Tensor gx(in_shape_);
  const long p = static_cast<long>(pad_);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < in_c_; ++c) {
      double* plane = gx.data() + (b * in_c_ + c) * H * W;
      for (std::size_t ki = 0; ki < k_; ++ki)
        for (std::size_t kj = 0; kj < k_; ++kj) {
          const double* src = dcols.data() + ((c * k_ + ki) * k_ + kj) * B * hw + b * hw;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const long iy = static_cast<long>(oy + ki) - p;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const long ix = static_cast<long>(ox + kj) - p;
              if (ix >= 0 && ix < static_cast<long>(W))
                plane[static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)] += src[oy * Wo + ox];
            }
          }
        }
    }
  return gx;
}

// --- Relu -----------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  output_ = x;
  for (auto& v : output_.values()) v = v > 0.0 ? v : 0.0;
  return output_;
}

Tensor Relu::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor gx = grad_out;
  for (std::size_t i = 0; i < gx.size(); ++i)
    if (output_[i] <= 0.0) gx[i] = 0.0;
  return gx;
}

// --- MaxPool2 -------------------------------------------------------------

std::vector<std::size_t> MaxPool2::output_shape(const std::vector<std::size_t>& in) const {
  if (in.size() != 3 || in[1] < 2 || in[2] < 2) throw ShapeError("maxpool input too small");
  return {in[0], in[1] / 2, in[2] / 2};
}

Tensor MaxPool2::forward(const Tensor& x) {
  require_rank(x, 4, "maxpool");
  const auto os = output_shape({x.dim(1), x.dim(2), x.dim(3)});
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = os[1], Wo = os[2];
  in_shape_ = x.shape();
  Tensor y({B, C, Ho, Wo});
  argmax_.assign(y.size(), 0);
  std::size_t out = 0;
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const std::size_t base = bc * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox, ++out) {
        std::size_t best = base + (2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * W + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        argmax_[out] = best;
        y[out] = x[best];
      }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor gx(in_shape_);
  for (std::size_t i = 0; i < grad_out.size(); ++i) gx[argmax_[i]] += grad_out[i];
  return gx;
}

// --- Flatten --------------------------------------------------------------

std::vector<std::size_t> Flatten::output_shape(const std::vector<std::size_t>& in) const {
  return {shape_numel(in)};
}

Tensor Flatten::forward(const Tensor& x) {
  in_shape_ = x.shape();
  return x.reshaped({x.rows(), x.row_size()});
}

Tensor Flatten::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  return grad_out.reshaped(in_shape_);
}

// --- Standardize ----------------------------------------------------------

Standardize::Standardize(std::size_t channels)
    : mean_(make_param("mean", Tensor({channels}, 0.0), false)),
      std_(make_param("std", Tensor({channels}, 1.0), false)) {}

void Standardize::set_statistics(const std::vector<double>& mean, const std::vector<double>& stddev) {
  if (mean.size() != mean_.value.size() || stddev.size() != std_.value.size())
    throw ShapeError("standardization channel count mismatch");
  for (std::size_t c = 0; c < mean.size(); ++c) {
    if (!(stddev[c] > 0.0)) throw ArgumentError("standardization std must be positive");
    mean_.value[c] = mean[c];
    std_.value[c] = stddev[c];
  }
}

Tensor Standardize::forward(const Tensor& x) {
  require_rank(x, 4, "standardize");
  const std::size_t C = x.dim(1);
  if (C != mean_.value.size()) throw ShapeError("standardize channel mismatch: " + x.shape_string());
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor y = x;
  for (std::size_t b = 0; b < x.dim(0); ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double* p = y.data() + (b * C + c) * plane;
      const double m = mean_.value[c], inv = 1.0 / std_.value[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * inv;
    }
  return y;
}

Tensor Standardize::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!need_input_grad) return {};
  const std::size_t C = grad_out.dim(1), plane = grad_out.dim(2) * grad_out.dim(3);
  Tensor gx = grad_out;
  for (std::size_t b = 0; b < grad_out.dim(0); ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double* p = gx.data() + (b * C + c) * plane;
      const double inv = 1.0 / std_.value[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] *= inv;
    }
  return gx;
}

// --- Sequential -----------------------------------------------------------

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  const std::size_t index = layers_.size();
  for (Parameter* p : layer->parameters())
    p->name = std::to_string(index) + "." + layer->kind() + "." + p->name;
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out, bool need_input_grad) {
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, need_input_grad || i > 0);
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_)
    for (Parameter* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Sequential::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_)
    for (Parameter* p : l->parameters()) out.push_back(p);
  return out;
}

std::vector<std::size_t> Sequential::output_shape(std::vector<std::size_t> in) const {
  for (const auto& l : layers_) in = l->output_shape(in);
  return in;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters())
    if (p->trainable) n += p->value.size();
  return n;
}

void Sequential::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

}  // namespace mtda
