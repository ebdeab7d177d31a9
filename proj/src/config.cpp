#include "qsrlab/config.hpp"

#include <fstream>

#include "qsrlab/problem.hpp"

namespace qsrlab::config {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const json& require(const json& j, const std::string& key,
                    const std::string& prefix) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(join(prefix, key), "missing");
  return j.at(key);
}

double get_double(const json& j, const std::string& key,
                  const std::string& prefix) {
  const json& v = require(j, key, prefix);
  if (!v.is_number()) throw ConfigError(join(prefix, key), "expected a number");
  return v.get<double>();
}

double get_double_or(const json& j, const std::string& key,
                     const std::string& prefix, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_double(j, key, prefix);
}

std::int64_t get_int(const json& j, const std::string& key,
                     const std::string& prefix) {
  const json& v = require(j, key, prefix);
  if (!v.is_number_integer())
    throw ConfigError(join(prefix, key), "expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t get_int_or(const json& j, const std::string& key,
                        const std::string& prefix, std::int64_t fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_int(j, key, prefix);
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& prefix) {
  const json& v = require(j, key, prefix);
  if (!v.is_string()) throw ConfigError(join(prefix, key), "expected a string");
  return v.get<std::string>();
}

std::optional<double> get_optional_double(const json& j, const std::string& key,
                                          const std::string& prefix) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null())
    return std::nullopt;
  return get_double(j, key, prefix);
}

Eigen::VectorXd get_vector(const json& j, const std::string& key,
                           const std::string& prefix) {
  const json& v = require(j, key, prefix);
  if (!v.is_array() || v.empty())
    throw ConfigError(join(prefix, key), "expected a non-empty array");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError(join(prefix, key), "expected numeric entries");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

template <typename Fn>
auto rewrap(const std::string& prefix, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(prefix, e.what());
  }
}

}  // namespace

schedules::LrSchedule parse_schedule(const json& j, const std::string& prefix) {
  const std::string kind = get_string(j, "kind", prefix);
  return rewrap(prefix, [&]() -> schedules::LrSchedule {
    if (kind == "cosine" || kind == "linear") {
      const double eta_max = get_double(j, "eta_max", prefix);
      const double eta_end = get_double_or(j, "eta_end", prefix, 0.0);
      const std::int64_t warmup = get_int_or(j, "warmup_steps", prefix, 0);
      const std::int64_t total = get_int(j, "total_steps", prefix);
      const std::int64_t spe = get_int_or(j, "steps_per_epoch", prefix, 1);
      return kind == "cosine"
                 ? schedules::LrSchedule::cosine(eta_max, eta_end, warmup,
                                                 total, spe)
                 : schedules::LrSchedule::linear(eta_max, eta_end, warmup,
                                                 total, spe);
    }
    if (kind == "step_quantized") {
      return schedules::LrSchedule::step_quantized(
          parse_schedule(require(j, "base", prefix), join(prefix, "base")));
    }
    if (kind == "modified_cosine") {
      return schedules::LrSchedule::modified_cosine(
          parse_schedule(require(j, "base", prefix), join(prefix, "base")),
          get_int(j, "freeze_step", prefix));
    }
    if (kind == "smith_step") {
      return schedules::LrSchedule::smith_step(
          get_double(j, "eta_max", prefix),
          get_int_or(j, "warmup_steps", prefix, 0),
          get_int(j, "total_steps", prefix),
          get_int(j, "steps_per_epoch", prefix),
          get_int_or(j, "plateau_epochs", prefix, 150),
          get_int_or(j, "halve_every", prefix, 30));
    }
    throw ConfigError(join(prefix, "kind"), "unknown schedule kind '" + kind + "'");
  });
}

syncrules::SyncRule parse_sync_rule(const json& j, const std::string& prefix) {
  const std::string kind = get_string(j, "kind", prefix);
  return rewrap(prefix, [&]() -> syncrules::SyncRule {
    if (kind == "constant")
      return syncrules::SyncRule::constant(get_int(j, "h_base", prefix));
    if (kind == "qsr")
      return syncrules::SyncRule::qsr(get_double(j, "alpha", prefix),
                                      get_int(j, "h_base", prefix));
    if (kind == "cubic")
      return syncrules::SyncRule::cubic(get_double(j, "rho", prefix),
                                        get_int(j, "h_base", prefix));
    if (kind == "beta_over_eta")
      return syncrules::SyncRule::beta_over_eta(get_double(j, "beta", prefix),
                                                get_int(j, "h_base", prefix));
    if (kind == "power")
      return syncrules::SyncRule::power(
          static_cast<int>(get_int(j, "gamma", prefix)),
          get_double(j, "coefficient", prefix), get_int(j, "h_base", prefix));
    if (kind == "post_local")
      return syncrules::SyncRule::post_local(get_int(j, "switch_step", prefix),
                                             get_int(j, "h_after", prefix));
    if (kind == "swap")
      return syncrules::SyncRule::swap(get_int(j, "h_const", prefix),
                                       get_int(j, "switch_step", prefix));
    throw ConfigError(join(prefix, "kind"), "unknown sync rule kind '" + kind + "'");
  });
}

namespace {

engine::OptimizerSpec parse_optimizer(const json& j,
                                      const std::string& prefix) {
  engine::OptimizerSpec spec;
  const std::string kind = get_string(j, "kind", prefix);
  if (kind == "sgd") {
    spec.kind = engine::OptimizerKind::sgd;
    spec.sgd.momentum = get_double_or(j, "momentum", prefix, 0.0);
    spec.sgd.weight_decay = get_double_or(j, "weight_decay", prefix, 0.0);
    spec.sgd.clip = get_optional_double(j, "clip", prefix);
  } else if (kind == "adamw") {
    spec.kind = engine::OptimizerKind::adamw;
    spec.adamw.beta1 = get_double_or(j, "beta1", prefix, 0.9);
    spec.adamw.beta2 = get_double_or(j, "beta2", prefix, 0.999);
    spec.adamw.eps = get_double_or(j, "eps", prefix, 1e-8);
    spec.adamw.weight_decay = get_double_or(j, "weight_decay", prefix, 0.0);
    spec.adamw.clip = get_optional_double(j, "clip", prefix);
  } else {
    throw ConfigError(join(prefix, "kind"), "unknown optimizer kind '" + kind + "'");
  }
  return spec;
}

void parse_problem(RunConfig& cfg, const json& j, const std::string& prefix) {
  const std::string kind = get_string(j, "kind", prefix);
  rewrap(prefix, [&]() {
    if (kind == "noisy_quadratic") {
      Eigen::VectorXd curv;
      if (j.contains("curvatures")) {
        curv = get_vector(j, "curvatures", prefix);
      } else {
        const std::int64_t dim = get_int(j, "dim", prefix);
        curv = Eigen::VectorXd::Constant(dim, get_double(j, "curvature", prefix));
      }
      Eigen::VectorXd minimizer = Eigen::VectorXd::Zero(curv.size());
      if (j.contains("minimizer")) minimizer = get_vector(j, "minimizer", prefix);
      if (minimizer.size() != curv.size())
        throw ConfigError(join(prefix, "minimizer"), "dimension mismatch");
      cfg.problem = engine::make_noisy_quadratic(
          curv, minimizer, get_double_or(j, "noise_scale", prefix, 0.0),
          get_int_or(j, "dataset_size", prefix, 0),
          static_cast<std::uint64_t>(get_int_or(j, "data_seed", prefix, 0)));
    } else if (kind == "manifold_toy") {
      auto toy = std::make_shared<sdelab::ManifoldToy>(
          get_double_or(j, "a", prefix, 1.0),
          get_double_or(j, "sigma_x", prefix, 0.0),
          get_double_or(j, "sigma_y", prefix, 1.0),
          static_cast<int>(get_int_or(j, "y_dim", prefix, 1)));
      cfg.manifold = toy;
      Eigen::VectorXd start = Eigen::VectorXd::Zero(toy->dim());
      if (j.contains("start")) {
        start = get_vector(j, "start", prefix);
        if (start.size() != toy->dim())
          throw ConfigError(join(prefix, "start"), "dimension mismatch");
      }
      cfg.problem = engine::make_manifold_toy_problem(
          toy, start, get_double_or(j, "init_jitter", prefix, 0.0),
          get_int_or(j, "dataset_size", prefix, 0),
          static_cast<std::uint64_t>(get_int_or(j, "data_seed", prefix, 0)));
    } else if (kind == "mlp") {
      engine::MlpSpec spec;
      spec.input_dim = static_cast<int>(get_int_or(j, "input_dim", prefix, 2));
      spec.hidden = static_cast<int>(get_int_or(j, "hidden", prefix, 8));
      spec.classes = static_cast<int>(get_int_or(j, "classes", prefix, 2));
      spec.dataset_size = get_int_or(j, "dataset_size", prefix, 1024);
      spec.mixture_radius = get_double_or(j, "mixture_radius", prefix, 2.0);
      spec.mixture_std = get_double_or(j, "mixture_std", prefix, 0.7);
      spec.data_seed =
          static_cast<std::uint64_t>(get_int_or(j, "data_seed", prefix, 0));
      cfg.problem = engine::make_mlp_classifier(spec);
    } else {
      throw ConfigError(join(prefix, "kind"), "unknown problem kind '" + kind + "'");
    }
    return 0;
  });
}

sdelab::SdeVariant parse_variant(const std::string& v,
                                 const std::string& prefix) {
  if (v == "sgd") return sdelab::SdeVariant::sgd;
  if (v == "local_lsr") return sdelab::SdeVariant::local_lsr;
  if (v == "local_qsr") return sdelab::SdeVariant::local_qsr;
  throw ConfigError(prefix, "unknown SDE variant '" + v + "'");
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  cfg.raw = j;
  cfg.seed = static_cast<std::uint64_t>(get_int_or(j, "seed", "", 0));

  if (j.contains("schedule"))
    cfg.schedule = parse_schedule(j.at("schedule"), "schedule");
  if (j.contains("sync_rule"))
    cfg.sync_rule = parse_sync_rule(j.at("sync_rule"), "sync_rule");
  if (j.contains("optimizer"))
    cfg.optimizer = parse_optimizer(j.at("optimizer"), "optimizer");
  if (j.contains("problem")) parse_problem(cfg, j.at("problem"), "problem");

  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.has_train = true;
    const std::string mode = get_string(t, "mode", "train");
    if (mode == "parallel")
      cfg.train_mode = TrainMode::parallel;
    else if (mode == "local")
      cfg.train_mode = TrainMode::local;
    else
      throw ConfigError("train.mode", "expected 'parallel' or 'local'");

    if (!cfg.problem) throw ConfigError("problem", "missing (needed by train)");
    if (!cfg.schedule) throw ConfigError("schedule", "missing (needed by train)");
    if (!cfg.optimizer) throw ConfigError("optimizer", "missing (needed by train)");

    cfg.train.workers = static_cast<int>(get_int_or(t, "workers", "train", 1));
    cfg.train.b_loc = get_int_or(t, "b_loc", "train", 1);
    cfg.train.seed = cfg.seed;
    cfg.train.problem = cfg.problem;
    cfg.train.schedule = *cfg.schedule;
    cfg.train.sync_rule = cfg.sync_rule;
    cfg.train.optimizer = *cfg.optimizer;
    cfg.train.parallel_trace_stride = get_int_or(t, "trace_stride", "train", 0);

    const std::string sampling =
        t.contains("sampling") ? get_string(t, "sampling", "train")
                               : "with_replacement";
    if (sampling == "with_replacement")
      cfg.train.sampling = engine::SamplingScheme::with_replacement;
    else if (sampling == "without_replacement")
      cfg.train.sampling = engine::SamplingScheme::without_replacement;
    else
      throw ConfigError("train.sampling", "unknown sampling scheme");

    const std::string moments =
        t.contains("moment_handling") ? get_string(t, "moment_handling", "train")
                                      : "persist";
    if (moments == "persist")
      cfg.train.moment_handling = engine::MomentHandling::persist;
    else if (moments == "reset")
      cfg.train.moment_handling = engine::MomentHandling::reset;
    else if (moments == "average")
      cfg.train.moment_handling = engine::MomentHandling::average;
    else
      throw ConfigError("train.moment_handling", "unknown moment handling");

    if (cfg.train_mode == TrainMode::local && !cfg.sync_rule)
      throw ConfigError("sync_rule", "missing (needed by local training)");
  }

  if (j.contains("sde")) {
    const json& s = j.at("sde");
    if (!cfg.manifold)
      throw ConfigError("problem", "sde runs need a manifold problem");
    SdeRunSpec spec;
    spec.sde.variant = parse_variant(get_string(s, "variant", "sde"), "sde.variant");
    spec.sde.beta = get_double_or(s, "beta", "sde", 0.0);
    spec.sde.batch_size = get_double(s, "batch_size", "sde");
    spec.sde.workers = static_cast<int>(get_int_or(s, "workers", "sde", 1));
    spec.sde.horizon = get_double(s, "horizon", "sde");
    spec.sde.dt = get_double(s, "dt", "sde");
    spec.sde.save_every = get_int_or(s, "save_every", "sde", 1);
    spec.sde.seed = cfg.seed;
    spec.n_paths = get_int_or(s, "n_paths", "sde", 1);
    spec.zeta0 = get_vector(s, "zeta0", "sde");
    if (spec.zeta0.size() != cfg.manifold->dim())
      throw ConfigError("sde.zeta0", "dimension mismatch");
    cfg.sde = std::move(spec);
  }

  if (j.contains("moments")) {
    const json& m = j.at("moments");
    if (!cfg.manifold)
      throw ConfigError("problem", "moment runs need a manifold problem");
    MomentRunSpec spec;
    spec.alpha = get_double(m, "alpha", "moments");
    spec.h_base = get_int_or(m, "h_base", "moments", 1);
    spec.eta = get_double(m, "eta", "moments");
    spec.b_loc = get_int_or(m, "b_loc", "moments", 1);
    spec.workers = static_cast<int>(get_int_or(m, "workers", "moments", 1));
    spec.n_seeds = get_int_or(m, "n_seeds", "moments", 1000);
    spec.zeta0 = get_vector(m, "zeta0", "moments");
    if (spec.zeta0.size() != cfg.manifold->dim())
      throw ConfigError("moments.zeta0", "dimension mismatch");
    cfg.moments = std::move(spec);
  }

  if (j.contains("commcost")) {
    const json& c = j.at("commcost");
    CommcostSpec spec;
    spec.t_tot_para_hours = get_double(c, "t_tot_para_hours", "commcost");
    spec.t_tot_h1_hours = get_double(c, "t_tot_h1_hours", "commcost");
    spec.h1 = get_int(c, "h1", "commcost");
    if (c.contains("predict_h2")) {
      for (const auto& v : c.at("predict_h2"))
        spec.predict_h2.push_back(v.get<double>());
    }
    if (c.contains("fractions")) {
      for (const auto& f : c.at("fractions"))
        spec.fractions.emplace_back(get_string(f, "label", "commcost.fractions"),
                                    get_double(f, "fraction", "commcost.fractions"));
    }
    if (c.contains("rules")) {
      std::size_t i = 0;
      for (const auto& r : c.at("rules")) {
        const std::string prefix = "commcost.rules[" + std::to_string(i++) + "]";
        spec.rules.emplace_back(get_string(r, "label", prefix),
                                parse_sync_rule(require(r, "rule", prefix),
                                                join(prefix, "rule")));
      }
      if (!cfg.schedule)
        throw ConfigError("schedule", "missing (needed by commcost.rules)");
    }
    cfg.commcost = std::move(spec);
  }

  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

void apply_seed_override(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.train.seed = seed;
  if (config.sde) config.sde->sde.seed = seed;
  config.raw["seed"] = seed;
}

}  // namespace qsrlab::config
