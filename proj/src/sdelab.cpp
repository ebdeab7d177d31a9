#include "qsrlab/sdelab.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

#include "qsrlab/rng.hpp"

namespace qsrlab::sdelab {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0,
                 kA63 = 46732.0 / 5247.0, kA64 = 49.0 / 176.0,
                 kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0,
                 kE4 = 71.0 / 1920.0, kE5 = -17253.0 / 339200.0,
                 kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

double pair_threshold(const Eigen::VectorXd& eigenvalues) {
  const double scale = eigenvalues.cwiseAbs().maxCoeff();
  return std::max(1e-10 * scale, 1e-14);
}

// Shared double-sum machinery for sigma_diamond / psi_hat / the attenuated
// residual: weight(lambda_i + lambda_j) applied to <Sigma - Sigma_par, v v^T>
// over pairs with a nonzero eigenvalue.
template <typename WeightFn>
Eigen::MatrixXd eigenpair_weighted_sum(const ManifoldProblem& problem,
                                       const Eigen::VectorXd& zeta,
                                       WeightFn weight) {
  const Eigen::MatrixXd hess = problem.hessian(zeta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("Hessian eigendecomposition failed");
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& v = es.eigenvectors();
  const double thresh = pair_threshold(es.eigenvalues());

  const Eigen::MatrixXd residual =
      problem.noise_covariance(zeta) - sigma_parallel(problem, zeta);
  const Eigen::MatrixXd rt = v.transpose() * residual * v;

  const int d = problem.dim();
  Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (lam(i) <= thresh && lam(j) <= thresh) continue;
      scaled(i, j) = weight(lam(i) + lam(j)) * rt(i, j);
    }
  }
  Eigen::MatrixXd out = v * scaled * v.transpose();
  return 0.5 * (out + out.transpose());
}

void check_on_manifold(const ManifoldProblem& problem,
                       const Eigen::VectorXd& zeta) {
  const double tol = 1e-6 * (1.0 + zeta.norm());
  if (problem.manifold_distance(zeta) > tol)
    throw std::domain_error("point is not on the minimizer manifold");
}

}  // namespace

std::optional<Eigen::VectorXd> gradient_flow_projection(
    const ManifoldProblem& problem, const Eigen::VectorXd& start, double tol,
    const GradientFlowOptions& options) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");

  const auto rhs = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return -problem.grad(x);
  };

  Eigen::VectorXd x = start;
  Eigen::VectorXd k1 = rhs(x);
  double t = 0.0;
  double dt = 1e-2 / (1.0 + k1.norm());

  for (std::int64_t step = 0; step < options.max_steps; ++step) {
    if (!x.allFinite()) return std::nullopt;
    const double grad_norm = k1.norm();
    const double dist = problem.manifold_distance(x);
    if (grad_norm <= tol && dist <= tol) return x;
    if (t >= options.max_time) return std::nullopt;
    // The gradient-norm stop is amplified by the local curvature
    // (||grad|| ~ lambda * dist near the manifold), so the absolute
    // step-error floor has to shrink by the same factor.
    const double stiffness =
        std::clamp(grad_norm / std::max(dist, 1e-300), 1.0, 1e12);

    const Eigen::VectorXd k2 = rhs(x + dt * (kA21 * k1));
    const Eigen::VectorXd k3 = rhs(x + dt * (kA31 * k1 + kA32 * k2));
    const Eigen::VectorXd k4 = rhs(x + dt * (kA41 * k1 + kA42 * k2 + kA43 * k3));
    const Eigen::VectorXd k5 =
        rhs(x + dt * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
    const Eigen::VectorXd k6 = rhs(
        x + dt * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
    const Eigen::VectorXd x_new =
        x + dt * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
    const Eigen::VectorXd k7 = rhs(x_new);
    const Eigen::VectorXd err_vec =
        dt * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);

    // Component-wise atol+rtol control. A purely absolute scale lets the
    // controller park dt at the stability boundary of the decaying
    // components, where they hover instead of converging.
    const double atol = options.abs_tol_factor * tol / stiffness;
    double err = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      err = std::max(err, std::abs(err_vec(i)) /
                              (atol + options.rel_tol * std::abs(x(i))));
    }
    // Overflowing stages (step far beyond the stability limit) must shrink
    // the step, not poison it with NaN.
    if (!std::isfinite(err) || !x_new.allFinite()) err = 1e10;
    if (err <= 1.0) {
      x = x_new;
      k1 = k7;  // first-same-as-last
      t += dt;
    }
    const double factor =
        std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
    dt *= factor;
  }
  return std::nullopt;
}

double psi_scalar(double x) {
  if (x < 0.0) throw std::invalid_argument("psi is defined on x >= 0");
  if (x < 1e-4) {
    // (e^-x - 1 + x)/x = x/2 - x^2/6 + x^3/24 - ...
    return x * (0.5 + x * (-1.0 / 6.0 + x * (1.0 / 24.0)));
  }
  return (std::exp(-x) - 1.0 + x) / x;
}

Eigen::MatrixXd projection_jacobian(const ManifoldProblem& problem,
                                    const Eigen::VectorXd& zeta) {
  if (auto j = problem.analytic_projection_jacobian(zeta)) return *j;
  const int d = problem.dim();
  const double delta = 1e-4 * (1.0 + zeta.norm());
  Eigen::MatrixXd j(d, d);
  Eigen::VectorXd probe = zeta;
  for (int i = 0; i < d; ++i) {
    probe(i) = zeta(i) + delta;
    const auto plus = problem.project(probe);
    probe(i) = zeta(i) - delta;
    const auto minus = problem.project(probe);
    probe(i) = zeta(i);
    if (!plus || !minus)
      throw std::runtime_error("projection failed while differentiating Phi");
    j.col(i) = (*plus - *minus) / (2.0 * delta);
  }
  return j;
}

Eigen::VectorXd projection_hessian_applied(const ManifoldProblem& problem,
                                           const Eigen::VectorXd& zeta,
                                           const Eigen::MatrixXd& m) {
  if (auto h = problem.analytic_projection_hessian_applied(zeta, m)) return *h;
  // Decompose M into eigendirections; ∂²Φ[u u^T] is a directional second
  // difference of the projection.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed in ∂²Φ[M]");
  const double delta = 1e-4 * (1.0 + zeta.norm());
  const auto center = problem.project(zeta);
  if (!center) throw std::runtime_error("projection failed at expansion point");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(problem.dim());
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  for (int r = 0; r < m.rows(); ++r) {
    const double w = es.eigenvalues()(r);
    if (std::abs(w) <= 1e-12 * std::max(scale, 1.0)) continue;
    const Eigen::VectorXd u = es.eigenvectors().col(r);
    const auto plus = problem.project(zeta + delta * u);
    const auto minus = problem.project(zeta - delta * u);
    if (!plus || !minus)
      throw std::runtime_error("projection failed while differentiating Phi");
    out += w * (*plus - 2.0 * (*center) + *minus) / (delta * delta);
  }
  return out;
}

Eigen::MatrixXd sigma_parallel(const ManifoldProblem& problem,
                               const Eigen::VectorXd& zeta) {
  check_on_manifold(problem, zeta);
  const Eigen::MatrixXd j = projection_jacobian(problem, zeta);
  Eigen::MatrixXd out = j * problem.noise_covariance(zeta) * j.transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd sigma_diamond(const ManifoldProblem& problem,
                              const Eigen::VectorXd& zeta) {
  check_on_manifold(problem, zeta);
  return eigenpair_weighted_sum(problem, zeta,
                                [](double s) { return 1.0 / s; });
}

Eigen::MatrixXd psi_hat(const ManifoldProblem& problem,
                        const Eigen::VectorXd& zeta, double beta) {
  check_on_manifold(problem, zeta);
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  return eigenpair_weighted_sum(
      problem, zeta, [beta](double s) { return psi_scalar(beta * s) / s; });
}

Eigen::MatrixXd attenuated_residual_covariance(const ManifoldProblem& problem,
                                               const Eigen::VectorXd& zeta,
                                               double beta) {
  check_on_manifold(problem, zeta);
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  return eigenpair_weighted_sum(
      problem, zeta, [beta](double s) { return psi_scalar(beta * s); });
}

double sharpness(const ManifoldProblem& problem, const Eigen::VectorXd& zeta) {
  check_on_manifold(problem, zeta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(problem.hessian(zeta));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("Hessian eigendecomposition failed");
  return es.eigenvalues().maxCoeff();
}

SdePath integrate_slow_sde(const ManifoldProblem& problem,
                           const SlowSdeSpec& spec,
                           const Eigen::VectorXd& zeta0) {
  if (!(spec.dt > 0.0) || !(spec.horizon > 0.0))
    throw std::invalid_argument("dt and horizon must be > 0");
  if (spec.workers < 1 || !(spec.batch_size > 0))
    throw std::invalid_argument("bad worker count or batch size");
  if (spec.save_every < 1) throw std::invalid_argument("save_every must be >= 1");
  if (spec.variant == SdeVariant::local_lsr && spec.beta < 0.0)
    throw std::invalid_argument("beta must be >= 0");

  const double b = spec.batch_size;
  const double k = static_cast<double>(spec.workers);
  const std::int64_t steps =
      static_cast<std::int64_t>(std::ceil(spec.horizon / spec.dt));
  const double sqrt_dt = std::sqrt(spec.dt);

  RngStream rng = RngStream::keyed({spec.seed, stream_tag::sde});

  SdePath path;
  path.times.push_back(0.0);
  path.points.push_back(zeta0);

  Eigen::VectorXd zeta = zeta0;
  for (std::int64_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * spec.dt;

    const Eigen::MatrixXd sigma = problem.noise_covariance(zeta);
    Eigen::MatrixXd drift_mat;
    double drift_scale = 1.0 / (2.0 * b);
    switch (spec.variant) {
      case SdeVariant::sgd:
        drift_mat = sigma;
        break;
      case SdeVariant::local_lsr:
        drift_mat = sigma + (k - 1.0) * attenuated_residual_covariance(
                                            problem, zeta, spec.beta);
        break;
      case SdeVariant::local_qsr:
        drift_mat = sigma;
        drift_scale = k / (2.0 * b);
        break;
    }
    const Eigen::VectorXd drift =
        drift_scale * projection_hessian_applied(problem, zeta, drift_mat);

    const Eigen::MatrixXd diffusion = projection_jacobian(problem, zeta) *
                                      problem.noise_covariance_sqrt(zeta) /
                                      std::sqrt(b);
    Eigen::VectorXd noise(problem.dim());
    for (int i = 0; i < noise.size(); ++i) noise(i) = rng.next_normal();

    const Eigen::VectorXd proposal =
        zeta + drift * spec.dt + diffusion * noise * sqrt_dt;
    const auto retracted = problem.project(proposal);
    if (!retracted) throw IntegrationError(t + spec.dt);
    zeta = *retracted;

    if ((s + 1) % spec.save_every == 0 || s + 1 == steps) {
      path.times.push_back(t + spec.dt);
      path.points.push_back(zeta);
    }
  }
  return path;
}

namespace {

struct SeedResult {
  Eigen::VectorXd delta;
  bool excluded = false;
};

// Noise injection strategy hoisted out of the hot loop: constant diagonal
// covariances only draw normals for the nonzero entries.
struct NoisePlan {
  bool constant = false;
  bool diagonal = false;
  std::vector<std::pair<int, double>> diag_entries;  // (index, scale)
  Eigen::MatrixXd sqrt_scaled;
};

NoisePlan make_noise_plan(const ManifoldProblem& problem,
                          const Eigen::VectorXd& zeta0, std::int64_t b_loc) {
  NoisePlan plan;
  plan.constant = problem.noise_is_constant();
  plan.sqrt_scaled = problem.noise_covariance_sqrt(zeta0) /
                     std::sqrt(static_cast<double>(b_loc));
  if (plan.constant && plan.sqrt_scaled.isDiagonal(1e-300)) {
    plan.diagonal = true;
    for (int i = 0; i < plan.sqrt_scaled.rows(); ++i) {
      const double s = plan.sqrt_scaled(i, i);
      if (s != 0.0) plan.diag_entries.emplace_back(i, s);
    }
  }
  return plan;
}

// One round of local SGD with additive Gaussian gradient noise, averaged
// endpoint, projected back to the manifold.
SeedResult simulate_round(const ManifoldProblem& problem,
                          const Eigen::VectorXd& zeta0, double eta,
                          std::int64_t h, std::int64_t b_loc, int workers,
                          const NoisePlan& noise, std::uint64_t master_seed,
                          std::int64_t seed_index) {
  const int d = problem.dim();
  Eigen::VectorXd mean_endpoint = Eigen::VectorXd::Zero(d);

  // Scalar fast path for the 2-d toy (the Monte-Carlo bottleneck). Draw
  // order and arithmetic match the generic path exactly.
  const auto* toy = dynamic_cast<const ManifoldToy*>(&problem);
  if (toy && noise.diagonal && toy->y_dim() == 1) {
    const double a = toy->a();
    const bool noisy_x = !noise.diag_entries.empty() &&
                         noise.diag_entries.front().first == 0;
    const bool noisy_y = !noise.diag_entries.empty() &&
                         noise.diag_entries.back().first == 1;
    const double sx = noisy_x ? noise.diag_entries.front().second : 0.0;
    const double sy = noisy_y ? noise.diag_entries.back().second : 0.0;
    for (int k = 0; k < workers; ++k) {
      RngStream rng = RngStream::keyed({master_seed,
                                        static_cast<std::uint64_t>(seed_index),
                                        static_cast<std::uint64_t>(k),
                                        stream_tag::noise});
      double x = zeta0(0), y = zeta0(1);
      for (std::int64_t step = 0; step < h; ++step) {
        double gx = x * (y * y);
        double gy = (a + x * x) * y;
        if (noisy_x) gx += sx * rng.next_normal();
        if (noisy_y) gy += sy * rng.next_normal();
        x -= eta * gx;
        y -= eta * gy;
      }
      mean_endpoint(0) += x;
      mean_endpoint(1) += y;
    }
  } else {
    Eigen::VectorXd theta(d), g(d), z(d);
    for (int k = 0; k < workers; ++k) {
      RngStream rng = RngStream::keyed({master_seed,
                                        static_cast<std::uint64_t>(seed_index),
                                        static_cast<std::uint64_t>(k),
                                        stream_tag::noise});
      theta = zeta0;
      for (std::int64_t step = 0; step < h; ++step) {
        problem.grad_into(theta, g);
        if (noise.diagonal) {
          for (const auto& [i, s] : noise.diag_entries)
            g(i) += s * rng.next_normal();
        } else {
          for (int i = 0; i < d; ++i) z(i) = rng.next_normal();
          if (noise.constant) {
            g.noalias() += noise.sqrt_scaled * z;
          } else {
            g.noalias() += problem.noise_covariance_sqrt(theta) * z /
                           std::sqrt(static_cast<double>(b_loc));
          }
        }
        theta.noalias() -= eta * g;
      }
      mean_endpoint += theta;
    }
  }
  mean_endpoint /= static_cast<double>(workers);

  SeedResult res;
  const auto projected = problem.project(mean_endpoint);
  if (!projected) {
    res.excluded = true;
    res.delta = Eigen::VectorXd::Zero(d);
    return res;
  }
  res.delta = *projected - zeta0;
  return res;
}

void run_indexed(std::int64_t n, int threads,
                 const std::function<void(std::int64_t)>& fn) {
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next(0);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
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

}  // namespace

MomentReport estimate_round_moments(const ManifoldProblem& problem,
                                    double alpha, std::int64_t h_base,
                                    double eta, std::int64_t b_loc,
                                    int workers, std::int64_t n_seeds,
                                    const Eigen::VectorXd& zeta0,
                                    std::uint64_t seed, int threads) {
  if (!(alpha > 0.0) || !(eta > 0.0))
    throw std::invalid_argument("alpha and eta must be > 0");
  if (h_base < 1 || b_loc < 1 || workers < 1 || n_seeds < 1)
    throw std::invalid_argument("bad moment estimation parameters");
  check_on_manifold(problem, zeta0);

  const std::int64_t h = std::max(
      h_base, static_cast<std::int64_t>(std::floor((alpha / eta) * (alpha / eta))));
  const double alpha_eff_sq = static_cast<double>(h) * eta * eta;
  const double b_total = static_cast<double>(b_loc) * workers;
  const int d = problem.dim();

  const NoisePlan noise = make_noise_plan(problem, zeta0, b_loc);

  std::vector<SeedResult> results(static_cast<std::size_t>(n_seeds));
  run_indexed(n_seeds, threads, [&](std::int64_t i) {
    results[static_cast<std::size_t>(i)] =
        simulate_round(problem, zeta0, eta, h, b_loc, workers, noise, seed, i);
  });

  MomentReport report;
  report.alpha = alpha;
  report.alpha_eff_sq = alpha_eff_sq;
  report.eta = eta;
  report.h_used = h;
  report.b_loc = b_loc;
  report.workers = workers;
  report.n_seeds = n_seeds;

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd sum_outer = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sum_outer_sq = Eigen::MatrixXd::Zero(d, d);
  double sum6 = 0.0, sum6_sq = 0.0;
  std::int64_t included = 0;
  for (const SeedResult& r : results) {  // seed order: deterministic reduction
    if (r.excluded) {
      ++report.n_excluded;
      continue;
    }
    ++included;
    sum += r.delta;
    sum_sq += r.delta.cwiseProduct(r.delta);
    const Eigen::MatrixXd outer = r.delta * r.delta.transpose();
    sum_outer += outer;
    sum_outer_sq += outer.cwiseProduct(outer);
    const double p6 = std::pow(r.delta.squaredNorm(), 3.0);
    sum6 += p6;
    sum6_sq += p6 * p6;
  }
  if (included == 0) throw std::runtime_error("all seeds were excluded");
  const double n = static_cast<double>(included);

  report.first_moment = sum / n;
  report.second_moment = sum_outer / n;
  report.sixth_moment = sum6 / n;
  report.first_moment_se =
      ((sum_sq / n - report.first_moment.cwiseProduct(report.first_moment))
           .cwiseMax(0.0) /
       n)
          .cwiseSqrt();
  report.second_moment_se =
      ((sum_outer_sq / n -
        report.second_moment.cwiseProduct(report.second_moment))
           .cwiseMax(0.0) /
       n)
          .cwiseSqrt();
  report.sixth_moment_se = std::sqrt(
      std::max(0.0, sum6_sq / n - report.sixth_moment * report.sixth_moment) /
      n);

  report.predicted_first =
      (alpha_eff_sq / (2.0 * static_cast<double>(b_loc))) *
      projection_hessian_applied(problem, zeta0,
                                 problem.noise_covariance(zeta0));
  report.predicted_second =
      (alpha_eff_sq / b_total) * sigma_parallel(problem, zeta0);

  report.valid = report.n_excluded * 100 <= n_seeds;
  return report;
}

}  // namespace qsrlab::sdelab
