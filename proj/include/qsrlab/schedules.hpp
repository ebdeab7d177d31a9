#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace qsrlab::schedules {

enum class Kind {
  cosine,
  linear,
  step_quantized,
  modified_cosine,
  smith_step,
};

std::string kind_name(Kind k);

/// A total map from global step t in [0, total_steps) to the learning rate.
/// Immutable after construction; lr_at is pure, so schedules can be shared
/// freely across threads.
///
/// All kinds share the same warmup convention: for t < warmup_steps the rate
/// ramps linearly as eta_max * (t + 1) / warmup_steps.
class LrSchedule {
 public:
  /// Half-cosine decay from eta_max at the end of warmup to eta_end at the
  /// final step.
  static LrSchedule cosine(double eta_max, double eta_end,
                           std::int64_t warmup_steps, std::int64_t total_steps,
                           std::int64_t steps_per_epoch = 1);

  /// Straight-line decay from eta_max to eta_end.
  static LrSchedule linear(double eta_max, double eta_end,
                           std::int64_t warmup_steps, std::int64_t total_steps,
                           std::int64_t steps_per_epoch = 1);

  /// Rounds the decay phase of `base` to exact powers of two:
  /// lr(t) = 2^round(log2 base.lr(t)), ties on the exponent resolved to even.
  /// The warmup region is copied unquantized.
  static LrSchedule step_quantized(LrSchedule base);

  /// Follows `base` until freeze_step, then holds base.lr_at(freeze_step).
  static LrSchedule modified_cosine(LrSchedule base, std::int64_t freeze_step);

  /// Stays at eta_max for `plateau_epochs`, then halves every `halve_every`
  /// epochs: epoch e >= plateau gets eta_max / 2^(floor((e-plateau)/halve)+1).
  static LrSchedule smith_step(double eta_max, std::int64_t warmup_steps,
                               std::int64_t total_steps,
                               std::int64_t steps_per_epoch,
                               std::int64_t plateau_epochs = 150,
                               std::int64_t halve_every = 30);

  double lr_at(std::int64_t t) const;

  Kind kind() const { return kind_; }
  double eta_max() const { return eta_max_; }
  double eta_end() const { return eta_end_; }
  std::int64_t warmup_steps() const { return warmup_steps_; }
  std::int64_t total_steps() const { return total_steps_; }
  std::int64_t steps_per_epoch() const { return steps_per_epoch_; }

 private:
  LrSchedule() = default;

  Kind kind_ = Kind::cosine;
  double eta_max_ = 0.0;
  double eta_end_ = 0.0;
  std::int64_t warmup_steps_ = 0;
  std::int64_t total_steps_ = 1;
  std::int64_t steps_per_epoch_ = 1;
  std::int64_t freeze_step_ = 0;    // modified_cosine
  std::int64_t plateau_epochs_ = 0; // smith_step
  std::int64_t halve_every_ = 0;    // smith_step
  std::shared_ptr<const LrSchedule> base_;  // step_quantized, modified_cosine
};

}  // namespace qsrlab::schedules
