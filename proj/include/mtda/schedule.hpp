#pragma once

#include <cstddef>

namespace mtda {

// g = ln(f / s) / N_e. ArgumentError for s <= 0, f <= 0 or N_e < 1.
double growth_rate(double s, double f, int total_epochs);

// beta = s * exp(g * e), clamped to at most `ceiling` (pass max(s, f)).
// ArgumentError for e < 0.
double beta(double s, double g, double e, double ceiling);

enum class BetaGranularity { epoch, batch };

// Exponential UDA -> distillation progression.
class BetaSchedule {
 public:
  // ConfigError unless 0 < s <= 1, 0 < f <= 1 and total_epochs >= 1.
  BetaSchedule(double s, double f, int total_epochs);

  double start() const { return s_; }
  double final_value() const { return f_; }
  int total_epochs() const { return total_epochs_; }
  double growth() const { return g_; }

  double at(double e) const;  // beta at (possibly fractional) epoch e
  // beta for a step; batch granularity uses e + batch / epoch_length.
  double at_step(std::size_t epoch, std::size_t batch, std::size_t epoch_length,
                 BetaGranularity granularity) const;

 private:
  double s_, f_;
  int total_epochs_;
  double g_;
};

}  // namespace mtda
