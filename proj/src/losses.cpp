#include "mtda/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mtda/errors.hpp"

namespace mtda {

void LossWeights::validate() const {
  if (!std::isfinite(gamma) || !std::isfinite(alpha) || !std::isfinite(tau))
    throw ConfigError("loss weights must be finite");
  if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
}

namespace {

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_rows(const Tensor& logits, std::size_t n, const char* what) {
  if (logits.rank() != 2) throw ShapeError(std::string(what) + " expects B x C logits");
  if (logits.rows() != n)
    throw ShapeError(std::string(what) + ": " + std::to_string(logits.rows()) + " rows but " +
                     std::to_string(n) + " labels");
}

double kl_row(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * (safe_log(p[i]) - safe_log(q[i]));
  return kl;
}

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw ArgumentError(std::string(name) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-5) throw ArgumentError(std::string(name) + " is not normalized");
}

std::vector<int> domain_labels(std::size_t n_source, std::size_t n_total) {
  std::vector<int> d(n_total, 1);
  std::fill(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n_source), 0);
  return d;
}

void scale_in_place(Tensor& t, double s) {
  for (auto& v : t.values()) v *= s;
}

// Rows [offset, offset + block.rows()) of a zero tensor shaped like full.
Tensor embed_rows(const Tensor& block, std::size_t total_rows, std::size_t offset) {
  Tensor out({total_rows, block.row_size()});
  std::copy(block.values().begin(), block.values().end(), out.values().begin() +
                                                              static_cast<std::ptrdiff_t>(offset * block.row_size()));
  return out;
}

}  // namespace

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  Tensor unused;
  return cross_entropy(logits, labels, unused);
}

double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor& grad) {
  check_rows(logits, labels.size(), "cross_entropy");
  const std::size_t B = logits.rows(), C = logits.row_size();
  if (B == 0) throw ArgumentError("cross_entropy on an empty batch");
  grad = Tensor({B, C});
  double total = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= C)
      throw ArgumentError("label " + std::to_string(y) + " out of range for " + std::to_string(C) + " classes");
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - row[static_cast<std::size_t>(y)];
    auto g = grad.row(r);
    for (std::size_t c = 0; c < C; ++c) g[c] = std::exp(row[c] - log_z) / static_cast<double>(B);
    g[static_cast<std::size_t>(y)] -= 1.0 / static_cast<double>(B);
  }
  return total / static_cast<double>(B);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ArgumentError("kl_divergence length mismatch");
  check_distribution(p, "p");
  check_distribution(q, "q");
  return std::max(0.0, kl_row(p, q));
}

double kl_divergence(const Tensor& p, const Tensor& q) {
  if (p.shape() != q.shape() || p.rank() != 2) throw ShapeError("kl_divergence expects equal B x C tensors");
  if (p.rows() == 0) throw ArgumentError("kl_divergence on an empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) total += kl_divergence(p.row(r), q.row(r));
  return total / static_cast<double>(p.rows());
}

DistillationKl distillation_kl(const Tensor& teacher_logits, const Tensor& student_logits, double tau,
                               KdConvention convention, bool teacher_grad) {
  if (teacher_logits.shape() != student_logits.shape() || teacher_logits.rank() != 2)
    throw ShapeError("teacher and student logits differ in shape: " + teacher_logits.shape_string() + " vs " +
                     student_logits.shape_string());
  const std::size_t B = teacher_logits.rows(), C = teacher_logits.row_size();
  if (B == 0) throw ArgumentError("distillation on an empty batch");
  const bool both = convention == KdConvention::both_tempered_scaled;
  const double student_tau = both ? tau : 1.0;
  const double factor = both ? tau * tau : 1.0;

  const Tensor p = temperature_softmax(teacher_logits, tau);
  const Tensor q = temperature_softmax(student_logits, student_tau);
  DistillationKl out;
  out.grad_student = Tensor({B, C});
  if (teacher_grad) out.grad_teacher = Tensor({B, C});
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t r = 0; r < B; ++r) {
    const auto pr = p.row(r), qr = q.row(r);
    const double kl = kl_row(pr, qr);
    out.value += kl;
    auto gs = out.grad_student.row(r);
    for (std::size_t c = 0; c < C; ++c) gs[c] = factor * (qr[c] - pr[c]) / student_tau * inv_b;
    if (teacher_grad) {
      auto gt = out.grad_teacher.row(r);
      for (std::size_t c = 0; c < C; ++c)
        gt[c] = pr[c] > 0.0 ? factor / tau * pr[c] * (safe_log(pr[c]) - safe_log(qr[c]) - kl) * inv_b : 0.0;
    }
  }
  out.value = factor * out.value * inv_b;
  return out;
}

double domain_confusion_loss(const Tensor& features_source, const Tensor& features_target,
                             DomainClassifier& dclf) {
  const Tensor all = Tensor::concat_rows(features_source, features_target);
  if (all.rows() == 0) throw ArgumentError("domain confusion needs at least one sample");
  if (all.rank() != 2 || all.dim(1) != dclf.feature_dim())
    throw ShapeError("feature dimension " + all.shape_string() + " does not match domain classifier (" +
                     std::to_string(dclf.feature_dim()) + ")");
  const Tensor reversed = grl_apply(all, dclf.grl_lambda());
  const auto labels = domain_labels(features_source.rows(), all.rows());
  return cross_entropy(dclf.forward(reversed), labels);
}

DomainConfusion domain_confusion(DomainClassifier& dclf, const Tensor& features, std::size_t n_source,
                                 double grad_scale, bool through_grl) {
  if (features.rank() != 2 || features.dim(1) != dclf.feature_dim())
    throw ShapeError("feature dimension " + features.shape_string() + " does not match domain classifier (" +
                     std::to_string(dclf.feature_dim()) + ")");
  if (features.rows() == 0) throw ArgumentError("domain confusion needs at least one sample");
  const Tensor input = through_grl ? grl_apply(features, dclf.grl_lambda()) : features;
  const auto labels = domain_labels(n_source, features.rows());
  Tensor g;
  DomainConfusion out;
  out.value = cross_entropy(dclf.forward(input), labels, g);
  scale_in_place(g, grad_scale);
  const Tensor g_input = dclf.backward(g);
  out.feature_grad = through_grl ? grl_backward(g_input, dclf.grl_lambda()) : g_input;
  return out;
}

TeacherDaTerms teacher_da_loss(ClassifierNetwork& teacher, DomainClassifier& dclf, const Tensor& source_images,
                               std::span<const int> source_labels, const Tensor& target_images,
                               const LossWeights& weights, GradOptions grad) {
  const std::size_t ns = source_images.rows();
  const Tensor x = Tensor::concat_rows(source_images, target_images);
  const NetOutput out = teacher.forward(x);

  Tensor g_ce;
  TeacherDaTerms terms;
  terms.cross_entropy = cross_entropy(out.logits.slice_rows(0, ns), source_labels, g_ce);
  const DomainConfusion dc = domain_confusion(dclf, out.features, ns, grad.backward ? grad.scale * weights.gamma : 0.0);
  terms.domain_confusion = dc.value;
  terms.value = terms.cross_entropy + weights.gamma * terms.domain_confusion;

  if (grad.backward) {
    scale_in_place(g_ce, grad.scale);
    teacher.backward(embed_rows(g_ce, x.rows(), 0), dc.feature_grad);
  }
  return terms;
}

double kd_source_loss(const Tensor& teacher_logits, ClassifierNetwork& student, const Tensor& source_images,
                      std::span<const int> source_labels, const LossWeights& weights, GradOptions grad,
                      KdOptions options) {
  const NetOutput s = student.forward(source_images);
  const DistillationKl kl = distillation_kl(teacher_logits, s.logits, weights.tau, options.convention);
  Tensor g_ce;
  const double ce = cross_entropy(s.logits, source_labels, g_ce);
  if (grad.backward) {
    Tensor g = kl.grad_student;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad.scale * (g[i] + weights.alpha * g_ce[i]);
    student.backward(g, {});
  }
  return kl.value + weights.alpha * ce;
}

double kd_source_loss(ClassifierNetwork& teacher, ClassifierNetwork& student, const Tensor& source_images,
                      std::span<const int> source_labels, const LossWeights& weights, GradOptions grad,
                      KdOptions options) {
  const Tensor t_logits = teacher.forward(source_images).logits;
  const double value = kd_source_loss(t_logits, student, source_images, source_labels, weights, grad, options);
  if (grad.backward && options.update_teacher) {
    const Tensor s_logits = student.forward(source_images).logits;
    DistillationKl kl = distillation_kl(t_logits, s_logits, weights.tau, options.convention, true);
    scale_in_place(kl.grad_teacher, grad.scale);
    teacher.forward(source_images);
    teacher.backward(kl.grad_teacher, {});
  }
  return value;
}

double kd_target_loss(const Tensor& teacher_logits, ClassifierNetwork& student, DomainClassifier& student_dclf,
                      const Tensor& target_images, const Tensor& source_images, const LossWeights& weights,
                      bool consistency, GradOptions grad, KdOptions options) {
  const std::size_t ns = consistency ? source_images.rows() : 0;
  const Tensor x = consistency ? Tensor::concat_rows(source_images, target_images) : target_images;
  const NetOutput s = student.forward(x);
  const Tensor target_logits = consistency ? s.logits.slice_rows(ns, x.rows()) : s.logits;
  DistillationKl kl = distillation_kl(teacher_logits, target_logits, weights.tau, options.convention);
  double value = kl.value;

  Tensor feature_grad;
  if (consistency) {
    const DomainConfusion dc = domain_confusion(student_dclf, s.features, ns, grad.backward ? grad.scale * weights.alpha : 0.0);
    value += weights.alpha * dc.value;
    feature_grad = dc.feature_grad;
  }
  if (grad.backward) {
    scale_in_place(kl.grad_student, grad.scale);
    student.backward(embed_rows(kl.grad_student, x.rows(), ns), feature_grad);
  }
  return value;
}

double kd_target_loss(ClassifierNetwork& teacher, ClassifierNetwork& student, DomainClassifier& student_dclf,
                      const Tensor& target_images, const Tensor& source_images, const LossWeights& weights,
                      bool consistency, GradOptions grad, KdOptions options) {
  const Tensor t_logits = teacher.forward(target_images).logits;
  const double value = kd_target_loss(t_logits, student, student_dclf, target_images, source_images, weights,
                                      consistency, grad, options);
  if (grad.backward && options.update_teacher) {
    const Tensor s_logits = student.forward(target_images).logits;
    DistillationKl kl = distillation_kl(t_logits, s_logits, weights.tau, options.convention, true);
    scale_in_place(kl.grad_teacher, grad.scale);
    teacher.forward(target_images);
    teacher.backward(kl.grad_teacher, {});
  }
  return value;
}

LossBreakdown combined_teacher_objective(double da_term, double kd_source_term, double kd_target_term,
                                         double beta) {
  if (!(beta > 0.0)) throw ScheduleError("beta must be > 0, got " + std::to_string(beta));
  LossBreakdown b;
  b.da_term = da_term;
  b.kd_source_term = kd_source_term;
  b.kd_target_term = kd_target_term;
  b.beta = beta;
  b.total = (1.0 - beta) * da_term + beta * (kd_source_term + kd_target_term);
  return b;
}

}  // namespace mtda
