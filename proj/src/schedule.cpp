#include "mtda/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtda/errors.hpp"

namespace mtda {

double growth_rate(double s, double f, int total_epochs) {
  if (!(s > 0.0) || !(f > 0.0)) throw ArgumentError("schedule start and final values must be positive");
  if (total_epochs < 1) throw ArgumentError("schedule needs at least one epoch");
  return std::log(f / s) / static_cast<double>(total_epochs);
}

double beta(double s, double g, double e, double ceiling) {
  if (!(e >= 0.0)) throw ArgumentError("epoch index must be >= 0");
  if (e == 0.0) return s;
  return std::min(s * std::exp(g * e), ceiling);
}

BetaSchedule::BetaSchedule(double s, double f, int total_epochs) : s_(s), f_(f), total_epochs_(total_epochs) {
  if (!(s > 0.0 && s <= 1.0)) throw ConfigError("schedule start s must lie in (0, 1], got " + std::to_string(s));
  if (!(f > 0.0 && f <= 1.0)) throw ConfigError("schedule final f must lie in (0, 1], got " + std::to_string(f));
  if (total_epochs < 1) throw ConfigError("schedule needs N_e >= 1");
  g_ = growth_rate(s, f, total_epochs);
}

double BetaSchedule::at(double e) const { return beta(s_, g_, e, std::max(s_, f_)); }

double BetaSchedule::at_step(std::size_t epoch, std::size_t batch, std::size_t epoch_length,
                             BetaGranularity granularity) const {
  double e = static_cast<double>(epoch);
  if (granularity == BetaGranularity::batch && epoch_length > 0)
    e += static_cast<double>(batch) / static_cast<double>(epoch_length);
  return at(e);
}

}  // namespace mtda
