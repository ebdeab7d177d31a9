#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "qsrlab/commcost.hpp"
#include "qsrlab/config.hpp"
#include "qsrlab/csv.hpp"
#include "qsrlab/engine.hpp"
#include "qsrlab/rng.hpp"
#include "qsrlab/sdelab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qsrlab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

json meta_json() {
  return json{{"tool", "qsrlab"}, {"format_version", config::kFormatVersion}};
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + (dir / name).string());
  return out;
}

void write_summary(const fs::path& dir, const config::RunConfig& cfg,
                   json results) {
  json summary{{"meta", meta_json()},
               {"config", cfg.raw},
               {"results", std::move(results)}};
  auto out = open_output(dir, "summary.json");
  out << summary.dump(2) << '\n';
}

void run_indexed(std::int64_t n, int threads,
                 const std::function<void(std::int64_t)>& fn) {
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next(0);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

int cmd_schedule(const config::RunConfig& cfg, const fs::path& out_dir) {
  if (!cfg.schedule) throw config::ConfigError("schedule", "missing");
  const auto& schedule = *cfg.schedule;

  {
    auto out = open_output(out_dir, "lr.csv");
    CsvWriter csv(out);
    csv.header({"step", "lr"});
    for (std::int64_t t = 0; t < schedule.total_steps(); ++t) {
      csv.field(t).field(schedule.lr_at(t));
      csv.endrow();
    }
  }

  json results{{"total_steps", schedule.total_steps()},
               {"warmup_steps", schedule.warmup_steps()},
               {"kind", schedules::kind_name(schedule.kind())}};

  if (cfg.sync_rule) {
    const auto timeline = syncrules::expand_timeline(*cfg.sync_rule, schedule);
    auto out = open_output(out_dir, "timeline.csv");
    syncrules::write_timeline_csv(timeline, out);
    results["num_syncs"] = timeline.num_syncs;
    results["comm_fraction"] =
        static_cast<double>(timeline.num_syncs) /
        static_cast<double>(timeline.total_steps);
  }

  write_summary(out_dir, cfg, std::move(results));
  return 0;
}

int cmd_train(const config::RunConfig& cfg, const fs::path& out_dir) {
  if (!cfg.has_train) throw config::ConfigError("train", "missing");
  const engine::Trace trace = cfg.train_mode == config::TrainMode::parallel
                                  ? engine::run_parallel(cfg.train)
                                  : engine::run_local(cfg.train);
  {
    auto out = open_output(out_dir, "trace.csv");
    engine::write_trace_csv(trace, out);
  }

  const auto& last = trace.rows.back();
  json results{{"mode", cfg.train_mode == config::TrainMode::parallel
                            ? "parallel"
                            : "local"},
               {"total_steps", trace.total_steps},
               {"rounds", trace.rows.size() - 1},
               {"final_loss", last.loss},
               {"final_param_norm", trace.final_params.norm()},
               {"final_params", vector_to_json(trace.final_params)}};
  if (last.sharpness) results["final_sharpness"] = *last.sharpness;
  write_summary(out_dir, cfg, std::move(results));
  return 0;
}

int cmd_sde(const config::RunConfig& cfg, const fs::path& out_dir,
            int threads) {
  if (!cfg.sde) throw config::ConfigError("sde", "missing");
  if (!cfg.manifold) throw config::ConfigError("problem", "missing manifold");
  const auto& spec = *cfg.sde;

  std::vector<sdelab::SdePath> paths(static_cast<std::size_t>(spec.n_paths));
  std::atomic<bool> failed(false);
  double failure_time = 0.0;
  std::mutex failure_mutex;
  run_indexed(spec.n_paths, threads, [&](std::int64_t p) {
    try {
      sdelab::SlowSdeSpec one = spec.sde;
      one.seed = mix64(spec.sde.seed ^ mix64(static_cast<std::uint64_t>(p)));
      paths[static_cast<std::size_t>(p)] =
          sdelab::integrate_slow_sde(*cfg.manifold, one, spec.zeta0);
    } catch (const sdelab::IntegrationError& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      failed = true;
      failure_time = e.time();
    }
  });
  if (failed) throw sdelab::IntegrationError(failure_time);

  const auto& times = paths.front().times;
  const int d = cfg.manifold->dim();
  const double n = static_cast<double>(spec.n_paths);

  auto out = open_output(out_dir, "sde_stats.csv");
  CsvWriter csv(out);
  std::vector<std::string> header{"time"};
  for (int i = 0; i < d; ++i) {
    header.push_back("mean_" + std::to_string(i));
    header.push_back("se_" + std::to_string(i));
  }
  csv.header(header);

  // Fit the drift of each coordinate by least squares on the mean path.
  double st = 0, stt = 0;
  Eigen::VectorXd sy = Eigen::VectorXd::Zero(d), sty = Eigen::VectorXd::Zero(d);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    for (const auto& path : paths) {  // path order: deterministic reduction
      mean += path.points[ti];
      sq += path.points[ti].cwiseProduct(path.points[ti]);
    }
    mean /= n;
    const Eigen::VectorXd var =
        (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
    const Eigen::VectorXd se = (var / n).cwiseSqrt();

    csv.field(times[ti]);
    for (int i = 0; i < d; ++i) csv.field(mean(i)).field(se(i));
    csv.endrow();

    st += times[ti];
    stt += times[ti] * times[ti];
    sy += mean;
    sty += times[ti] * mean;
  }
  const double m = static_cast<double>(times.size());
  const Eigen::VectorXd drift = (m * sty - st * sy) / (m * stt - st * st);

  json results{{"n_paths", spec.n_paths},
               {"saved_points", times.size()},
               {"fitted_drift", vector_to_json(drift)}};
  write_summary(out_dir, cfg, std::move(results));
  return 0;
}

int cmd_moments(const config::RunConfig& cfg, const fs::path& out_dir,
                int threads) {
  if (!cfg.moments) throw config::ConfigError("moments", "missing");
  if (!cfg.manifold) throw config::ConfigError("problem", "missing manifold");
  const auto& m = *cfg.moments;
  const auto report = sdelab::estimate_round_moments(
      *cfg.manifold, m.alpha, m.h_base, m.eta, m.b_loc, m.workers, m.n_seeds,
      m.zeta0, cfg.seed, threads);

  {
    auto out = open_output(out_dir, "moments.csv");
    CsvWriter csv(out);
    csv.header({"component", "first_moment", "first_se", "predicted_first",
                "second_moment_diag", "second_se_diag",
                "predicted_second_diag"});
    for (Eigen::Index i = 0; i < report.first_moment.size(); ++i) {
      csv.field(static_cast<std::int64_t>(i))
          .field(report.first_moment(i))
          .field(report.first_moment_se(i))
          .field(report.predicted_first(i))
          .field(report.second_moment(i, i))
          .field(report.second_moment_se(i, i))
          .field(report.predicted_second(i, i));
      csv.endrow();
    }
  }

  json results{{"alpha", report.alpha},
               {"alpha_eff_sq", report.alpha_eff_sq},
               {"eta", report.eta},
               {"h_used", report.h_used},
               {"b_loc", report.b_loc},
               {"workers", report.workers},
               {"n_seeds", report.n_seeds},
               {"n_excluded", report.n_excluded},
               {"valid", report.valid},
               {"first_moment", vector_to_json(report.first_moment)},
               {"first_moment_se", vector_to_json(report.first_moment_se)},
               {"predicted_first", vector_to_json(report.predicted_first)},
               {"second_moment", matrix_to_json(report.second_moment)},
               {"second_moment_se", matrix_to_json(report.second_moment_se)},
               {"predicted_second", matrix_to_json(report.predicted_second)},
               {"sixth_moment", report.sixth_moment},
               {"sixth_moment_se", report.sixth_moment_se}};
  write_summary(out_dir, cfg, std::move(results));
  return 0;
}

int cmd_commcost(const config::RunConfig& cfg, const fs::path& out_dir) {
  if (!cfg.commcost) throw config::ConfigError("commcost", "missing");
  auto spec = *cfg.commcost;

  for (const auto& [label, rule] : spec.rules) {
    spec.fractions.emplace_back(
        label, syncrules::comm_fraction(rule, *cfg.schedule));
  }

  const auto ledger = commcost::build_ledger(
      spec.t_tot_para_hours, spec.t_tot_h1_hours, spec.h1, spec.predict_h2,
      spec.fractions);

  {
    auto out = open_output(out_dir, "ledger.csv");
    CsvWriter csv(out);
    csv.header({"entry", "label", "hours"});
    csv.field("comm_para").field("").field(ledger.estimate.comm_hours);
    csv.endrow();
    csv.field("comp_para").field("").field(ledger.estimate.comp_hours);
    csv.endrow();
    for (const auto& p : ledger.predictions) {
      csv.field("predicted_total_h2").field(format_double(p.h2)).field(p.total_hours);
      csv.endrow();
    }
    for (const auto& f : ledger.fractions) {
      csv.field("rule_comm_time").field(f.label).field(f.comm_hours);
      csv.endrow();
    }
  }

  json fractions = json::array();
  for (const auto& f : ledger.fractions) {
    fractions.push_back(json{{"label", f.label},
                             {"fraction", f.fraction},
                             {"comm_hours", f.comm_hours}});
  }
  json predictions = json::array();
  for (const auto& p : ledger.predictions)
    predictions.push_back(json{{"h2", p.h2}, {"total_hours", p.total_hours}});

  json results{{"comm_hours", ledger.estimate.comm_hours},
               {"comp_hours", ledger.estimate.comp_hours},
               {"negative_comm", ledger.estimate.negative_comm},
               {"predictions", predictions},
               {"fractions", fractions}};
  write_summary(out_dir, cfg, std::move(results));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic lab for local gradient methods with dynamic synchronization schedules"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  int threads = 1;

  app.add_option("--config", config_path, "Path to the JSON run config")
      ->required();
  app.add_option("--out", out_dir, "Output directory (created if absent)");
  auto* seed_opt = app.add_option("--seed", seed_override,
                                  "Override the config seed");
  app.add_option("--threads", threads,
                 "Worker threads for Monte-Carlo loops (speed only)");

  auto* sub_schedule = app.add_subcommand(
      "schedule", "Dump the learning-rate schedule, round timeline and communication fraction");
  auto* sub_train = app.add_subcommand("train", "Run parallel or local training");
  auto* sub_sde = app.add_subcommand("sde", "Integrate the slow SDE over many paths");
  auto* sub_moments = app.add_subcommand("moments", "Monte-Carlo round-moment estimation");
  auto* sub_commcost = app.add_subcommand("commcost", "Communication-time estimation arithmetic");

  CLI11_PARSE(app, argc, argv);
  has_seed_override = seed_opt->count() > 0;

  try {
    config::RunConfig cfg = config::load_config_file(config_path);
    if (has_seed_override) config::apply_seed_override(cfg, seed_override);

    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::ios_base::failure("cannot create output directory: " + out_dir);

    if (sub_schedule->parsed()) return cmd_schedule(cfg, dir);
    if (sub_train->parsed()) return cmd_train(cfg, dir);
    if (sub_sde->parsed()) return cmd_sde(cfg, dir, threads);
    if (sub_moments->parsed()) return cmd_moments(cfg, dir, threads);
    if (sub_commcost->parsed()) return cmd_commcost(cfg, dir);
    return 0;
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const optim::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const sdelab::IntegrationError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
