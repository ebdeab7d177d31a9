#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsrlab/engine.hpp"
#include "qsrlab/manifold.hpp"
#include "qsrlab/schedules.hpp"
#include "qsrlab/sdelab.hpp"
#include "qsrlab/syncrules.hpp"

namespace qsrlab::config {

inline constexpr int kFormatVersion = 1;

/// Configuration problem: carries the offending key path for diagnostics.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SdeRunSpec {
  sdelab::SlowSdeSpec sde;
  std::int64_t n_paths = 1;
  Eigen::VectorXd zeta0;
};

struct MomentRunSpec {
  double alpha = 0.1;
  std::int64_t h_base = 1;
  double eta = 0.01;
  std::int64_t b_loc = 1;
  int workers = 1;
  std::int64_t n_seeds = 1000;
  Eigen::VectorXd zeta0;
};

struct CommcostSpec {
  double t_tot_para_hours = 0.0;
  double t_tot_h1_hours = 0.0;
  std::int64_t h1 = 2;
  std::vector<double> predict_h2;
  std::vector<std::pair<std::string, double>> fractions;
  // Rules whose fraction is computed against the config's schedule.
  std::vector<std::pair<std::string, syncrules::SyncRule>> rules;
};

enum class TrainMode { parallel, local };

/// Everything needed to reconstruct a run. `raw` keeps the resolved
/// canonical JSON that output files embed.
struct RunConfig {
  nlohmann::json raw;
  std::uint64_t seed = 0;

  std::optional<schedules::LrSchedule> schedule;
  std::optional<syncrules::SyncRule> sync_rule;
  std::optional<engine::OptimizerSpec> optimizer;
  std::shared_ptr<const engine::Problem> problem;
  std::shared_ptr<const sdelab::ManifoldProblem> manifold;

  TrainMode train_mode = TrainMode::parallel;
  engine::TrainConfig train;  // populated when `train` section present
  bool has_train = false;

  std::optional<SdeRunSpec> sde;
  std::optional<MomentRunSpec> moments;
  std::optional<CommcostSpec> commcost;
};

/// Parses a config file; throws ConfigError naming the offending key.
RunConfig load_config_file(const std::string& path);
RunConfig parse_config(const nlohmann::json& j);

/// Overrides the seed everywhere it was propagated (incl. the embedded raw
/// form), for sweep scripting.
void apply_seed_override(RunConfig& config, std::uint64_t seed);

schedules::LrSchedule parse_schedule(const nlohmann::json& j,
                                     const std::string& prefix);
syncrules::SyncRule parse_sync_rule(const nlohmann::json& j,
                                    const std::string& prefix);

}  // namespace qsrlab::config
