#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "qsrlab/schedules.hpp"

namespace qsrlab::syncrules {

enum class Kind {
  constant,    // H = h_base every round
  power,       // H = max(h_base, floor((coefficient / lr)^gamma))
  post_local,  // H = 1 before switch_step, h_after at and beyond
  swap,        // H = h_const before switch_step, one final round after
};

std::string kind_name(Kind k);

/// Policy producing the synchronization period for each communication round.
/// The power family covers the quadratic rule (gamma=2, coefficient alpha),
/// the cubic rule (gamma=3, coefficient rho) and H = beta/eta (gamma=1).
struct SyncRule {
  Kind kind = Kind::constant;
  std::int64_t h_base = 1;
  int gamma = 2;              // power
  double coefficient = 0.0;   // power
  std::int64_t switch_step = 0;  // post_local, swap
  std::int64_t h_after = 1;      // post_local
  std::int64_t h_const = 1;      // swap

  static SyncRule constant(std::int64_t h);
  static SyncRule power(int gamma, double coefficient, std::int64_t h_base);
  static SyncRule qsr(double alpha, std::int64_t h_base) { return power(2, alpha, h_base); }
  static SyncRule cubic(double rho, std::int64_t h_base) { return power(3, rho, h_base); }
  static SyncRule beta_over_eta(double beta, std::int64_t h_base) { return power(1, beta, h_base); }
  static SyncRule post_local(std::int64_t switch_step, std::int64_t h_after);
  static SyncRule swap(std::int64_t h_const, std::int64_t switch_step);
};

struct Round {
  std::int64_t start_step;
  std::int64_t period;
  double lr_at_start;
};

/// Full partition of [0, total_steps) into communication rounds.
struct RoundTimeline {
  std::vector<Round> rounds;
  std::int64_t total_steps = 0;
  std::int64_t num_syncs = 0;
};

/// Period for a round starting at step t. During warmup the learning rate of
/// the first post-warmup step is used. The final round is truncated so that a
/// synchronization always lands on the last step.
std::int64_t next_period(const SyncRule& rule, std::int64_t t,
                         const schedules::LrSchedule& schedule);

/// Greedy expansion of next_period from step 0; rounds partition [0, T).
RoundTimeline expand_timeline(const SyncRule& rule,
                              const schedules::LrSchedule& schedule);

/// Synchronizations per step, relative to data parallel (which syncs every
/// step): num_syncs / total_steps.
double comm_fraction(const SyncRule& rule,
                     const schedules::LrSchedule& schedule);

/// CSV columns: round_index,start_step,H,lr_at_start.
void write_timeline_csv(const RoundTimeline& timeline, std::ostream& out);

}  // namespace qsrlab::syncrules
