#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qsrlab/manifold.hpp"

namespace qsrlab::sdelab {

struct GradientFlowOptions {
  double rel_tol = 1e-8;   // per-component relative step-error target
  double abs_tol_factor = 5e-3;  // absolute target as a fraction of `tol`
  double max_time = 1e7;         // flow-time budget
  std::int64_t max_steps = 500000;
};

/// Integrates dx/dt = -grad L(x) with an adaptive embedded Runge-Kutta
/// scheme until the gradient norm and the manifold distance fall below
/// `tol`. Returns the limit point, or an empty optional (the null sentinel)
/// on divergence or budget exhaustion.
std::optional<Eigen::VectorXd> gradient_flow_projection(
    const ManifoldProblem& problem, const Eigen::VectorXd& start, double tol,
    const GradientFlowOptions& options = {});

/// psi(x) = (exp(-x) - 1 + x) / x with psi(0) = 0; monotone on [0, inf),
/// bounded by 1. Evaluated by a Taylor series near zero for stability.
double psi_scalar(double x);

/// Projected noise covariance on the tangent space: ∂Φ Σ ∂Φ.
Eigen::MatrixXd sigma_parallel(const ManifoldProblem& problem,
                               const Eigen::VectorXd& zeta);

/// Hessian-rescaled residual noise covariance: in the Hessian eigenbasis
/// {(λ_i, v_i)}, sums <Σ - Σ_par, v_i v_j^T>/(λ_i + λ_j) over pairs with
/// λ_i ≠ 0 or λ_j ≠ 0.
Eigen::MatrixXd sigma_diamond(const ManifoldProblem& problem,
                              const Eigen::VectorXd& zeta);

/// Same double sum as sigma_diamond with each term attenuated by
/// psi(beta (λ_i + λ_j)); converges to sigma_diamond as beta -> inf.
Eigen::MatrixXd psi_hat(const ManifoldProblem& problem,
                        const Eigen::VectorXd& zeta, double beta);

/// The attenuated residual covariance without the 1/(λ_i+λ_j) rescale:
/// psi(beta (λ_i + λ_j)) <Σ - Σ_par, v_i v_j^T> summed over the same pairs.
/// This is the matrix the H=beta/eta slow SDE adds to Σ in its drift.
Eigen::MatrixXd attenuated_residual_covariance(const ManifoldProblem& problem,
                                               const Eigen::VectorXd& zeta,
                                               double beta);

/// Largest Hessian eigenvalue at a point of the manifold.
double sharpness(const ManifoldProblem& problem, const Eigen::VectorXd& zeta);

/// Jacobian of Phi (analytic when the problem provides it, otherwise central
/// finite differences of the projection).
Eigen::MatrixXd projection_jacobian(const ManifoldProblem& problem,
                                    const Eigen::VectorXd& zeta);

/// ∂²Φ(ζ)[M] (analytic when provided, otherwise second differences of the
/// projection along the eigenvectors of M).
Eigen::VectorXd projection_hessian_applied(const ManifoldProblem& problem,
                                           const Eigen::VectorXd& zeta,
                                           const Eigen::MatrixXd& m);

enum class SdeVariant {
  sgd,        // drift (1/2B) ∂²Φ[Σ]
  local_lsr,  // drift (1/2B) ∂²Φ[Σ + (K-1) attenuated residual(β)]
  local_qsr,  // drift (K/2B) ∂²Φ[Σ]
};

struct SlowSdeSpec {
  SdeVariant variant = SdeVariant::sgd;
  double beta = 0.0;       // H*eta, local_lsr only
  double batch_size = 1;   // total batch size B
  int workers = 1;         // K
  double horizon = 1.0;    // continuous time to integrate
  double dt = 1e-2;
  std::uint64_t seed = 0;
  std::int64_t save_every = 1;  // record every n-th step
  double projection_tol = 1e-9;
};

struct SdePath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> points;
};

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(double time)
      : std::runtime_error("slow SDE retraction failed at t = " +
                           std::to_string(time)),
        time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Euler-Maruyama integration of the slow SDE on the manifold, with a
/// gradient-flow retraction after every step. Throws IntegrationError when
/// the retraction returns the null sentinel.
SdePath integrate_slow_sde(const ManifoldProblem& problem,
                           const SlowSdeSpec& spec,
                           const Eigen::VectorXd& zeta0);

struct MomentReport {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd first_moment_se;
  Eigen::MatrixXd second_moment;
  Eigen::MatrixXd second_moment_se;
  double sixth_moment = 0.0;
  double sixth_moment_se = 0.0;
  Eigen::VectorXd predicted_first;
  Eigen::MatrixXd predicted_second;
  std::int64_t n_seeds = 0;
  std::int64_t n_excluded = 0;
  bool valid = true;  // false when more than 1% of seeds were excluded
  double alpha = 0.0;
  double alpha_eff_sq = 0.0;  // H * eta^2 actually simulated
  double eta = 0.0;
  std::int64_t h_used = 0;
  std::int64_t b_loc = 1;
  int workers = 1;
};

/// Monte-Carlo estimate of the per-round moments of the change in the
/// manifold projection of the averaged iterate, for one round of local SGD
/// with period H = max(h_base, floor((alpha/eta)^2)) started from zeta0.
/// Reported alongside the leading-order predictions
/// (alpha_eff^2 / 2 B_loc) ∂²Φ[Σ] and (alpha_eff^2 / B) Σ_par.
MomentReport estimate_round_moments(const ManifoldProblem& problem,
                                    double alpha, std::int64_t h_base,
                                    double eta, std::int64_t b_loc,
                                    int workers, std::int64_t n_seeds,
                                    const Eigen::VectorXd& zeta0,
                                    std::uint64_t seed = 0, int threads = 1);

}  // namespace qsrlab::sdelab
