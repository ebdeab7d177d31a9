#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "qsrlab/optim.hpp"
#include "qsrlab/problem.hpp"
#include "qsrlab/schedules.hpp"
#include "qsrlab/syncrules.hpp"

namespace qsrlab::engine {

enum class SamplingScheme {
  with_replacement,     // i.i.d. draws from the shared dataset/distribution
  without_replacement,  // shared epoch permutation, evenly partitioned
};

enum class OptimizerKind { sgd, adamw };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::sgd;
  optim::SgdOptions sgd;
  optim::AdamWOptions adamw;

  std::unique_ptr<optim::Optimizer> build(int dim) const;
};

/// How local optimizer moments are treated across communication rounds.
/// Only parameters are averaged by the algorithm itself; moment buffers
/// persist locally by default.
enum class MomentHandling { persist, reset, average };

struct TrainConfig {
  int workers = 1;          // K
  std::int64_t b_loc = 1;   // per-worker batch size; global batch = K * b_loc
  std::uint64_t seed = 0;
  SamplingScheme sampling = SamplingScheme::with_replacement;
  MomentHandling moment_handling = MomentHandling::persist;
  std::shared_ptr<const Problem> problem;
  schedules::LrSchedule schedule = schedules::LrSchedule::cosine(1.0, 0.0, 0, 1);
  std::optional<syncrules::SyncRule> sync_rule;  // required by run_local
  OptimizerSpec optimizer;
  std::int64_t parallel_trace_stride = 0;  // 0: pick ~100 rows automatically

  std::int64_t global_batch() const { return b_loc * workers; }
};

struct TraceRow {
  std::int64_t round;       // 0 for the initial snapshot
  std::int64_t start_step;  // first step of the round
  std::int64_t period;      // H_s (0 for the initial snapshot)
  double lr_at_start;
  double loss;  // population loss at the post-sync iterate
  std::optional<double> sharpness;
};

struct Trace {
  std::vector<TraceRow> rows;
  Eigen::VectorXd final_params;
  std::int64_t total_steps = 0;
};

/// Indices of the local batch for (worker, global step) under the config's
/// sampling scheme. Pure function of the config; exposed for testing.
std::vector<std::uint64_t> sample_batch(const TrainConfig& config, int worker,
                                        std::int64_t step);

/// Data parallel training: per-step gradient averaging, one shared
/// optimizer state.
Trace run_parallel(const TrainConfig& config);

/// Local training: workers run H_s steps independently, then parameters are
/// averaged; optimizer state is per-worker.
Trace run_local(const TrainConfig& config);

/// Elementwise arithmetic mean, summed in replica order.
Eigen::VectorXd average_params(const std::vector<Eigen::VectorXd>& replicas);

/// CSV columns: round,start_step,H,lr_at_start,loss,sharpness.
void write_trace_csv(const Trace& trace, std::ostream& out);

}  // namespace qsrlab::engine
