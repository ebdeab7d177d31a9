#include "qsrlab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qsrlab/csv.hpp"
#include "qsrlab/rng.hpp"

namespace qsrlab::engine {

std::unique_ptr<optim::Optimizer> OptimizerSpec::build(int dim) const {
  if (kind == OptimizerKind::sgd)
    return std::make_unique<optim::Sgd>(dim, sgd);
  return std::make_unique<optim::AdamW>(dim, adamw);
}

namespace {

void validate(const TrainConfig& config, bool needs_rule) {
  if (!config.problem) throw std::invalid_argument("config has no problem");
  if (config.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (config.b_loc < 1) throw std::invalid_argument("b_loc must be >= 1");
  if (needs_rule && !config.sync_rule)
    throw std::invalid_argument("local training needs a sync rule");
  if (config.sampling == SamplingScheme::without_replacement) {
    const std::int64_t n = config.problem->dataset_size();
    if (n == 0)
      throw std::invalid_argument(
          "without_replacement sampling needs a finite dataset");
    if (n < config.global_batch())
      throw std::invalid_argument("dataset smaller than one global batch");
  }
}

// Fisher-Yates permutation of [0, n) from the epoch's shared stream. The
// result is memoized per thread; engine loops walk epochs in order, so the
// cache almost always hits.
const std::vector<std::uint64_t>& epoch_permutation(std::uint64_t seed,
                                                    std::int64_t epoch,
                                                    std::int64_t n) {
  struct Cache {
    std::uint64_t seed = 0;
    std::int64_t epoch = -1;
    std::int64_t n = -1;
    std::vector<std::uint64_t> perm;
  };
  thread_local Cache cache;
  if (cache.seed == seed && cache.epoch == epoch && cache.n == n)
    return cache.perm;

  cache.seed = seed;
  cache.epoch = epoch;
  cache.n = n;
  cache.perm.resize(static_cast<std::size_t>(n));
  std::iota(cache.perm.begin(), cache.perm.end(), 0);
  RngStream rng = RngStream::keyed(
      {seed, stream_tag::permutation, static_cast<std::uint64_t>(epoch)});
  for (std::int64_t i = n - 1; i > 0; --i) {
    const std::uint64_t j = rng.next_below(static_cast<std::uint64_t>(i + 1));
    std::swap(cache.perm[static_cast<std::size_t>(i)],
              cache.perm[static_cast<std::size_t>(j)]);
  }
  return cache.perm;
}

double checked_loss(const Problem& problem, const Eigen::VectorXd& theta,
                    std::span<const std::uint64_t> batch, std::int64_t step) {
  const double l = problem.loss(theta, batch);
  if (!std::isfinite(l)) throw optim::NumericError("non-finite loss", step);
  return l;
}

}  // namespace

std::vector<std::uint64_t> sample_batch(const TrainConfig& config, int worker,
                                        std::int64_t step) {
  if (worker < 0 || worker >= config.workers)
    throw std::out_of_range("worker index out of range");
  if (step < 0 || step >= config.schedule.total_steps())
    throw std::out_of_range("step index out of range");

  const std::int64_t n = config.problem->dataset_size();
  std::vector<std::uint64_t> batch(static_cast<std::size_t>(config.b_loc));

  if (config.sampling == SamplingScheme::with_replacement) {
    RngStream rng = RngStream::keyed({config.seed,
                                      static_cast<std::uint64_t>(worker),
                                      stream_tag::sample,
                                      static_cast<std::uint64_t>(step)});
    for (auto& key : batch)
      key = n > 0 ? rng.next_below(static_cast<std::uint64_t>(n))
                  : rng.next_u64();
    return batch;
  }

  // Without replacement: one shared permutation per epoch, partitioned
  // round-robin so the workers' index sets are disjoint and their union is
  // a prefix of the permutation. A new epoch starts as soon as a full batch
  // can no longer be formed.
  const std::int64_t batches_per_epoch = n / config.global_batch();
  const std::int64_t epoch = step / batches_per_epoch;
  const std::int64_t pos = step % batches_per_epoch;
  const auto& perm = epoch_permutation(config.seed, epoch, n);
  for (std::int64_t i = 0; i < config.b_loc; ++i) {
    const std::int64_t j = pos * config.b_loc + i;
    batch[static_cast<std::size_t>(i)] =
        perm[static_cast<std::size_t>(worker + config.workers * j)];
  }
  return batch;
}

Eigen::VectorXd average_params(const std::vector<Eigen::VectorXd>& replicas) {
  if (replicas.empty()) throw std::invalid_argument("no replicas to average");
  Eigen::VectorXd mean = replicas.front();
  for (std::size_t k = 1; k < replicas.size(); ++k) {
    if (replicas[k].size() != mean.size())
      throw std::invalid_argument("replica dimension mismatch");
    mean += replicas[k];
  }
  return mean / static_cast<double>(replicas.size());
}

Trace run_parallel(const TrainConfig& config) {
  validate(config, false);
  const Problem& problem = *config.problem;
  const std::int64_t total = config.schedule.total_steps();
  const int dim = problem.dim();

  Eigen::VectorXd theta = problem.initial_point(config.seed);
  auto optimizer = config.optimizer.build(dim);

  std::int64_t stride = config.parallel_trace_stride;
  if (stride <= 0) stride = std::max<std::int64_t>(1, total / 100);

  Trace trace;
  trace.total_steps = total;
  trace.rows.push_back({0, 0, 0, config.schedule.lr_at(0),
                        problem.population_loss(theta),
                        problem.sharpness(theta)});

  for (std::int64_t t = 0; t < total; ++t) {
    Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < config.workers; ++k) {
      const auto batch = sample_batch(config, k, t);
      checked_loss(problem, theta, batch, t);
      mean_grad += problem.grad(theta, batch);
    }
    mean_grad /= static_cast<double>(config.workers);
    if (!mean_grad.allFinite())
      throw optim::NumericError("non-finite gradient", t);
    optimizer->step(theta, config.schedule.lr_at(t), mean_grad);
    if (!theta.allFinite())
      throw optim::NumericError("non-finite parameters", t);

    if ((t + 1) % stride == 0 || t + 1 == total) {
      trace.rows.push_back({t + 1, t, 1, config.schedule.lr_at(t),
                            problem.population_loss(theta),
                            problem.sharpness(theta)});
    }
  }
  trace.final_params = theta;
  return trace;
}

Trace run_local(const TrainConfig& config) {
  validate(config, true);
  const Problem& problem = *config.problem;
  const int dim = problem.dim();
  const auto timeline =
      syncrules::expand_timeline(*config.sync_rule, config.schedule);

  Eigen::VectorXd global = problem.initial_point(config.seed);
  std::vector<Eigen::VectorXd> replicas(
      static_cast<std::size_t>(config.workers));
  std::vector<std::unique_ptr<optim::Optimizer>> states;
  states.reserve(static_cast<std::size_t>(config.workers));
  for (int k = 0; k < config.workers; ++k)
    states.push_back(config.optimizer.build(dim));

  Trace trace;
  trace.total_steps = config.schedule.total_steps();
  trace.rows.push_back({0, 0, 0, config.schedule.lr_at(0),
                        problem.population_loss(global),
                        problem.sharpness(global)});

  for (std::size_t s = 0; s < timeline.rounds.size(); ++s) {
    const auto& round = timeline.rounds[s];
    for (int k = 0; k < config.workers; ++k) {
      Eigen::VectorXd& theta = replicas[static_cast<std::size_t>(k)];
      theta = global;
      for (std::int64_t h = 0; h < round.period; ++h) {
        const std::int64_t t = round.start_step + h;
        const auto batch = sample_batch(config, k, t);
        checked_loss(problem, theta, batch, t);
        const Eigen::VectorXd g = problem.grad(theta, batch);
        if (!g.allFinite()) throw optim::NumericError("non-finite gradient", t);
        states[static_cast<std::size_t>(k)]->step(
            theta, config.schedule.lr_at(t), g);
        if (!theta.allFinite())
          throw optim::NumericError("non-finite parameters", t);
      }
    }
    global = average_params(replicas);

    if (config.moment_handling == MomentHandling::reset) {
      for (auto& st : states) st->reset_moments();
    } else if (config.moment_handling == MomentHandling::average) {
      std::vector<const optim::Optimizer*> group;
      group.reserve(states.size());
      for (const auto& st : states) group.push_back(st.get());
      auto averaged = states.front()->clone();
      averaged->average_moments(group);
      for (auto& st : states) st = averaged->clone();
    }

    trace.rows.push_back({static_cast<std::int64_t>(s + 1), round.start_step,
                          round.period, round.lr_at_start,
                          problem.population_loss(global),
                          problem.sharpness(global)});
  }
  trace.final_params = global;
  return trace;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  CsvWriter csv(out);
  csv.header({"round", "start_step", "H", "lr_at_start", "loss", "sharpness"});
  for (const TraceRow& row : trace.rows) {
    csv.field(row.round).field(row.start_step).field(row.period);
    csv.field(row.lr_at_start).field(row.loss);
    if (row.sharpness)
      csv.field(*row.sharpness);
    else
      csv.field("");
    csv.endrow();
  }
}

}  // namespace qsrlab::engine
