#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtda/models.hpp"
#include "mtda/tensor.hpp"

namespace mtda {

struct LossWeights {
  double gamma = 0.5;  // domain-confusion weight in the teacher DA loss
  double alpha = 0.5;  // auxiliary-term weight in both distillation losses
  double tau = 20.0;   // teacher distillation temperature

  void validate() const;  // ConfigError unless finite, non-negative, tau > 0
};

struct LossBreakdown {
  double total = 0.0;
  double da_term = 0.0;
  double kd_source_term = 0.0;
  double kd_target_term = 0.0;
  double beta = 0.0;
};

// Probabilities are clamped to at least this value inside logarithms.
inline constexpr double kProbFloor = 1e-12;

// How the student side of the distillation KL is formed.
enum class KdConvention {
  // KL(softmax(teacher/tau) || softmax(student/1)), no rescaling.
  student_unit_temperature,
  // Hinton-style: student also at tau and the KL multiplied by tau^2.
  both_tempered_scaled,
};

// Gradient handling shared by the network-level losses: every gradient that
// is accumulated is d(scale * loss). With backward = false only the value
// is computed.
struct GradOptions {
  double scale = 1.0;
  bool backward = true;
};

// ---- logit-level primitives ---------------------------------------------

// Mean over rows of -log softmax(logits)[label]. ArgumentError on an
// out-of-range label.
double cross_entropy(const Tensor& logits, std::span<const int> labels);
// Same value; also the gradient of the mean w.r.t. the logits.
double cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor& grad);

// sum_i p_i log(p_i / q_i) with 0 log 0 := 0. ArgumentError if either input
// is not normalized within 1e-5 (or lengths differ).
double kl_divergence(std::span<const double> p, std::span<const double> q);
// Row-wise KL, batch mean.
double kl_divergence(const Tensor& p, const Tensor& q);

struct DistillationKl {
  double value = 0.0;
  Tensor grad_student;  // d value / d student logits
  Tensor grad_teacher;  // d value / d teacher logits (only if requested)
};

// Batch-mean distillation KL between teacher logits at tau and student
// logits (temperature per convention).
DistillationKl distillation_kl(const Tensor& teacher_logits, const Tensor& student_logits, double tau,
                               KdConvention convention = KdConvention::student_unit_temperature,
                               bool teacher_grad = false);

// ---- domain confusion -----------------------------------------------------

// Mean binary cross-entropy of dclf over [source rows; target rows] with
// domain labels 0 (source) / 1 (target). Value only; passing the features
// through a GradientReversal first does not change it.
double domain_confusion_loss(const Tensor& features_source, const Tensor& features_target,
                             DomainClassifier& dclf);

struct DomainConfusion {
  double value = 0.0;
  // d(grad_scale * value) / d features. With through_grl the domain
  // classifier sits behind a GRL of its own coefficient, so this is the
  // reversed gradient that reaches the feature extractor.
  Tensor feature_grad;
};

// features holds n_source source rows followed by target rows. Accumulates
// grad_scale * dL/dtheta into the classifier's own parameters.
DomainConfusion domain_confusion(DomainClassifier& dclf, const Tensor& features, std::size_t n_source,
                                 double grad_scale, bool through_grl = true);

// ---- network-level losses --------------------------------------------------

struct TeacherDaTerms {
  double value = 0.0;           // ce + gamma * dc
  double cross_entropy = 0.0;
  double domain_confusion = 0.0;
};

// Source cross-entropy of the teacher plus gamma * domain confusion over
// GRL-wrapped teacher features of both batches. Gradients reach the
// teacher (extractor gets the reversed confusion gradient) and its dclf.
TeacherDaTerms teacher_da_loss(ClassifierNetwork& teacher, DomainClassifier& dclf, const Tensor& source_images,
                               std::span<const int> source_labels, const Tensor& target_images,
                               const LossWeights& weights, GradOptions grad = {});

struct KdOptions {
  KdConvention convention = KdConvention::student_unit_temperature;
  // Open-question switch: also push the distillation gradient into the
  // teacher. Off by default; only affects the network-level overloads.
  bool update_teacher = false;
};

// KL(teacher@tau, student@1) on source images + alpha * CE(student, y_s).
// The teacher signal is a constant unless options.update_teacher.
double kd_source_loss(ClassifierNetwork& teacher, ClassifierNetwork& student, const Tensor& source_images,
                      std::span<const int> source_labels, const LossWeights& weights, GradOptions grad = {},
                      KdOptions options = {});
// Same with precomputed teacher logits (fused signals).
double kd_source_loss(const Tensor& teacher_logits, ClassifierNetwork& student, const Tensor& source_images,
                      std::span<const int> source_labels, const LossWeights& weights, GradOptions grad = {},
                      KdOptions options = {});

// KL(teacher@tau, student@1) on target images + alpha * domain confusion of
// the student's dclf over GRL-wrapped student features of {x_s} u {x_t}.
// With consistency = false the second term is dropped entirely.
double kd_target_loss(ClassifierNetwork& teacher, ClassifierNetwork& student, DomainClassifier& student_dclf,
                      const Tensor& target_images, const Tensor& source_images, const LossWeights& weights,
                      bool consistency = true, GradOptions grad = {}, KdOptions options = {});
double kd_target_loss(const Tensor& teacher_logits, ClassifierNetwork& student, DomainClassifier& student_dclf,
                      const Tensor& target_images, const Tensor& source_images, const LossWeights& weights,
                      bool consistency = true, GradOptions grad = {}, KdOptions options = {});

// total = (1 - beta) * da + beta * (kd_source + kd_target). ScheduleError
// when beta <= 0.
LossBreakdown combined_teacher_objective(double da_term, double kd_source_term, double kd_target_term,
                                         double beta);

}  // namespace mtda
