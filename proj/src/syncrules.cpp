#include "qsrlab/syncrules.hpp"

#include <cmath>
#include <stdexcept>

#include "qsrlab/csv.hpp"

namespace qsrlab::syncrules {

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::constant: return "constant";
    case Kind::power: return "power";
    case Kind::post_local: return "post_local";
    case Kind::swap: return "swap";
  }
  return "?";
}

SyncRule SyncRule::constant(std::int64_t h) {
  if (h < 1) throw std::invalid_argument("constant period must be >= 1");
  SyncRule r;
  r.kind = Kind::constant;
  r.h_base = h;
  return r;
}

SyncRule SyncRule::power(int gamma, double coefficient, std::int64_t h_base) {
  if (gamma < 1 || gamma > 3) throw std::invalid_argument("gamma must be 1, 2 or 3");
  if (!(coefficient > 0.0)) throw std::invalid_argument("coefficient must be > 0");
  if (h_base < 1) throw std::invalid_argument("h_base must be >= 1");
  SyncRule r;
  r.kind = Kind::power;
  r.gamma = gamma;
  r.coefficient = coefficient;
  r.h_base = h_base;
  return r;
}

SyncRule SyncRule::post_local(std::int64_t switch_step, std::int64_t h_after) {
  if (switch_step < 0) throw std::invalid_argument("switch_step must be >= 0");
  if (h_after < 1) throw std::invalid_argument("h_after must be >= 1");
  SyncRule r;
  r.kind = Kind::post_local;
  r.switch_step = switch_step;
  r.h_after = h_after;
  return r;
}

SyncRule SyncRule::swap(std::int64_t h_const, std::int64_t switch_step) {
  if (h_const < 1) throw std::invalid_argument("h_const must be >= 1");
  if (switch_step < 0) throw std::invalid_argument("switch_step must be >= 0");
  SyncRule r;
  r.kind = Kind::swap;
  r.h_const = h_const;
  r.switch_step = switch_step;
  return r;
}

std::int64_t next_period(const SyncRule& rule, std::int64_t t,
                         const schedules::LrSchedule& schedule) {
  const std::int64_t total = schedule.total_steps();
  if (t < 0 || t >= total) throw std::out_of_range("round start step outside [0, T)");
  const std::int64_t remaining = total - t;

  std::int64_t h = 1;
  switch (rule.kind) {
    case Kind::constant:
      h = rule.h_base;
      break;
    case Kind::power: {
      // During warmup, use the rate of the first post-warmup step.
      const std::int64_t t_eff = std::max(t, schedule.warmup_steps());
      const double eta = schedule.lr_at(t_eff);
      const double grown = std::floor(std::pow(rule.coefficient / eta,
                                               static_cast<double>(rule.gamma)));
      // Guard against overflow from tiny learning rates before clamping.
      const double capped = std::min(grown, static_cast<double>(remaining));
      h = std::max(rule.h_base, static_cast<std::int64_t>(capped));
      break;
    }
    case Kind::post_local:
      h = t < rule.switch_step ? 1 : rule.h_after;
      break;
    case Kind::swap:
      // After the switch, one pure-local phase ending in a final averaging.
      h = t < rule.switch_step ? rule.h_const : remaining;
      break;
  }
  return std::min(h, remaining);
}

RoundTimeline expand_timeline(const SyncRule& rule,
                              const schedules::LrSchedule& schedule) {
  RoundTimeline tl;
  tl.total_steps = schedule.total_steps();
  std::int64_t t = 0;
  while (t < tl.total_steps) {
    const std::int64_t h = next_period(rule, t, schedule);
    tl.rounds.push_back({t, h, schedule.lr_at(t)});
    t += h;
  }
  tl.num_syncs = static_cast<std::int64_t>(tl.rounds.size());
  return tl;
}

double comm_fraction(const SyncRule& rule,
                     const schedules::LrSchedule& schedule) {
  const RoundTimeline tl = expand_timeline(rule, schedule);
  return static_cast<double>(tl.num_syncs) /
         static_cast<double>(tl.total_steps);
}

void write_timeline_csv(const RoundTimeline& timeline, std::ostream& out) {
  CsvWriter csv(out);
  csv.header({"round_index", "start_step", "H", "lr_at_start"});
  for (std::size_t i = 0; i < timeline.rounds.size(); ++i) {
    const Round& r = timeline.rounds[i];
    csv.field(static_cast<std::int64_t>(i))
        .field(r.start_step)
        .field(r.period)
        .field(r.lr_at_start);
    csv.endrow();
  }
}

}  // namespace qsrlab::syncrules
