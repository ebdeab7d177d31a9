#include "qsrlab/schedules.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qsrlab::schedules {

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::cosine: return "cosine";
    case Kind::linear: return "linear";
    case Kind::step_quantized: return "step_quantized";
    case Kind::modified_cosine: return "modified_cosine";
    case Kind::smith_step: return "smith_step";
  }
  return "?";
}

namespace {

void check_common(double eta_max, double eta_end, std::int64_t warmup_steps,
                  std::int64_t total_steps) {
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw std::invalid_argument("warmup_steps must be in [0, total_steps)");
  // Equality is allowed so constant (including all-zero) schedules exist.
  if (!(eta_max >= eta_end) || eta_end < 0.0)
    throw std::invalid_argument("require eta_max >= eta_end >= 0");
}

// Rounds log2(v) half-to-even and returns the corresponding power of two.
double round_to_power_of_two(double v) {
  if (!(v > 0.0)) throw std::domain_error("cannot quantize a non-positive learning rate");
  const double e = std::log2(v);
  double r = std::nearbyint(e);  // default FP rounding: half-to-even
  return std::exp2(r);
}

}  // namespace

LrSchedule LrSchedule::cosine(double eta_max, double eta_end,
                              std::int64_t warmup_steps,
                              std::int64_t total_steps,
                              std::int64_t steps_per_epoch) {
  check_common(eta_max, eta_end, warmup_steps, total_steps);
  LrSchedule s;
  s.kind_ = Kind::cosine;
  s.eta_max_ = eta_max;
  s.eta_end_ = eta_end;
  s.warmup_steps_ = warmup_steps;
  s.total_steps_ = total_steps;
  s.steps_per_epoch_ = steps_per_epoch;
  return s;
}

LrSchedule LrSchedule::linear(double eta_max, double eta_end,
                              std::int64_t warmup_steps,
                              std::int64_t total_steps,
                              std::int64_t steps_per_epoch) {
  check_common(eta_max, eta_end, warmup_steps, total_steps);
  LrSchedule s;
  s.kind_ = Kind::linear;
  s.eta_max_ = eta_max;
  s.eta_end_ = eta_end;
  s.warmup_steps_ = warmup_steps;
  s.total_steps_ = total_steps;
  s.steps_per_epoch_ = steps_per_epoch;
  return s;
}

LrSchedule LrSchedule::step_quantized(LrSchedule base) {
  LrSchedule s;
  s.kind_ = Kind::step_quantized;
  s.eta_max_ = base.eta_max_;
  s.eta_end_ = base.eta_end_;
  s.warmup_steps_ = base.warmup_steps_;
  s.total_steps_ = base.total_steps_;
  s.steps_per_epoch_ = base.steps_per_epoch_;
  s.base_ = std::make_shared<const LrSchedule>(std::move(base));
  return s;
}

LrSchedule LrSchedule::modified_cosine(LrSchedule base,
                                       std::int64_t freeze_step) {
  if (freeze_step < base.warmup_steps_ || freeze_step >= base.total_steps_)
    throw std::invalid_argument("freeze_step must be in [warmup_steps, total_steps)");
  LrSchedule s;
  s.kind_ = Kind::modified_cosine;
  s.eta_max_ = base.eta_max_;
  s.eta_end_ = base.eta_end_;
  s.warmup_steps_ = base.warmup_steps_;
  s.total_steps_ = base.total_steps_;
  s.steps_per_epoch_ = base.steps_per_epoch_;
  s.freeze_step_ = freeze_step;
  s.base_ = std::make_shared<const LrSchedule>(std::move(base));
  return s;
}

LrSchedule LrSchedule::smith_step(double eta_max, std::int64_t warmup_steps,
                                  std::int64_t total_steps,
                                  std::int64_t steps_per_epoch,
                                  std::int64_t plateau_epochs,
                                  std::int64_t halve_every) {
  check_common(eta_max, 0.0, warmup_steps, total_steps);
  if (steps_per_epoch < 1) throw std::invalid_argument("steps_per_epoch must be >= 1");
  if (plateau_epochs < 0 || halve_every < 1)
    throw std::invalid_argument("bad plateau/halving interval");
  if (plateau_epochs * steps_per_epoch >= total_steps)
    throw std::invalid_argument("plateau does not fit within total_steps");
  LrSchedule s;
  s.kind_ = Kind::smith_step;
  s.eta_max_ = eta_max;
  s.eta_end_ = 0.0;
  s.warmup_steps_ = warmup_steps;
  s.total_steps_ = total_steps;
  s.steps_per_epoch_ = steps_per_epoch;
  s.plateau_epochs_ = plateau_epochs;
  s.halve_every_ = halve_every;
  return s;
}

double LrSchedule::lr_at(std::int64_t t) const {
  if (t < 0 || t >= total_steps_)
    throw std::out_of_range("step index outside [0, total_steps)");
  if (t < warmup_steps_) {
    double ramp = eta_max_ * static_cast<double>(t + 1) /
                  static_cast<double>(warmup_steps_);
    // step_quantized copies the warmup region unquantized.
    return ramp;
  }
  switch (kind_) {
    case Kind::cosine: {
      const double phase = static_cast<double>(t - warmup_steps_) /
                           static_cast<double>(total_steps_ - warmup_steps_);
      return eta_end_ + (eta_max_ - eta_end_) * 0.5 *
                            (1.0 + std::cos(std::numbers::pi * phase));
    }
    case Kind::linear: {
      const double frac = static_cast<double>(total_steps_ - t) /
                          static_cast<double>(total_steps_ - warmup_steps_);
      return eta_end_ + (eta_max_ - eta_end_) * frac;
    }
    case Kind::step_quantized:
      return round_to_power_of_two(base_->lr_at(t));
    case Kind::modified_cosine:
      return base_->lr_at(t < freeze_step_ ? t : freeze_step_);
    case Kind::smith_step: {
      const std::int64_t epoch = t / steps_per_epoch_;
      if (epoch < plateau_epochs_) return eta_max_;
      const std::int64_t halvings = (epoch - plateau_epochs_) / halve_every_ + 1;
      return eta_max_ * std::exp2(static_cast<double>(-halvings));
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace qsrlab::schedules
