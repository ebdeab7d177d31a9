#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

namespace qsrlab::sdelab {

/// A loss with a known manifold of minimizers, enough derivative structure
/// for the slow-SDE machinery, and a gradient-noise model.
///
/// Analytic overrides (projection, Phi derivatives) are optional; generic
/// finite-difference and gradient-flow fallbacks are used otherwise.
class ManifoldProblem {
 public:
  virtual ~ManifoldProblem() = default;

  virtual int dim() const = 0;
  /// Rank of the Hessian on the manifold (codimension m).
  virtual int codim() const = 0;

  virtual double loss(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd grad(const Eigen::VectorXd& theta) const = 0;
  virtual void grad_into(const Eigen::VectorXd& theta,
                         Eigen::VectorXd& out) const {
    out = grad(theta);
  }
  virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const = 0;

  /// Contraction of the third derivative with a symmetric matrix M:
  /// component i equals sum_{j,k} d^3 L / (dθ_i dθ_j dθ_k) * M_{jk}.
  /// Default: central finite differences of the Hessian.
  virtual Eigen::VectorXd third_derivative(const Eigen::VectorXd& theta,
                                           const Eigen::MatrixXd& m) const;

  /// Gradient noise covariance Σ(θ); symmetric PSD.
  virtual Eigen::MatrixXd noise_covariance(const Eigen::VectorXd& theta) const = 0;
  /// Symmetric PSD square root of Σ(θ). Default: eigenvalue square root.
  virtual Eigen::MatrixXd noise_covariance_sqrt(const Eigen::VectorXd& theta) const;
  /// True when Σ does not depend on θ (enables hoisting out of hot loops).
  virtual bool noise_is_constant() const { return false; }

  /// Euclidean distance estimate to the minimizer manifold.
  virtual double manifold_distance(const Eigen::VectorXd& theta) const = 0;

  /// Gradient flow projection onto the manifold; empty optional when the
  /// flow fails to converge within budget. Default: numerical integration
  /// (see sdelab::gradient_flow_projection).
  virtual std::optional<Eigen::VectorXd> project(const Eigen::VectorXd& theta) const;

  /// Jacobian of the projection map, when known in closed form.
  virtual std::optional<Eigen::MatrixXd> analytic_projection_jacobian(
      const Eigen::VectorXd& theta) const {
    (void)theta;
    return std::nullopt;
  }

  /// ∂²Φ(ζ)[M] for ζ on the manifold, when known in closed form.
  virtual std::optional<Eigen::VectorXd> analytic_projection_hessian_applied(
      const Eigen::VectorXd& zeta, const Eigen::MatrixXd& m) const {
    (void)zeta;
    (void)m;
    return std::nullopt;
  }
};

/// The two-block toy landscape L(x, y) = 0.5 * (a + x^2) * ||y||^2 with
/// minimizer manifold {y = 0}. The curvature in the y directions is
/// h(x) = a + x^2, so sharpness decreases toward x = 0. Gradient noise is
/// Gaussian with constant diagonal covariance diag(sigma_x^2, sigma_y^2 I).
class ManifoldToy final : public ManifoldProblem {
 public:
  ManifoldToy(double a, double sigma_x, double sigma_y, int y_dim = 1);

  int dim() const override { return 1 + y_dim_; }
  int codim() const override { return y_dim_; }

  double loss(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd grad(const Eigen::VectorXd& theta) const override;
  void grad_into(const Eigen::VectorXd& theta,
                 Eigen::VectorXd& out) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd third_derivative(const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& m) const override;
  Eigen::MatrixXd noise_covariance(const Eigen::VectorXd& theta) const override;
  Eigen::MatrixXd noise_covariance_sqrt(const Eigen::VectorXd& theta) const override;
  bool noise_is_constant() const override { return true; }
  double manifold_distance(const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::VectorXd> project(const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::MatrixXd> analytic_projection_jacobian(
      const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::VectorXd> analytic_projection_hessian_applied(
      const Eigen::VectorXd& zeta, const Eigen::MatrixXd& m) const override;

  double curvature(double x) const { return a_ + x * x; }
  double a() const { return a_; }
  double sigma_x() const { return sigma_x_; }
  double sigma_y() const { return sigma_y_; }
  int y_dim() const { return y_dim_; }

  /// Exact x-coordinate of the gradient flow limit from (x, y).
  double project_x(double x, double y_sq) const;

 private:
  double a_;
  double sigma_x_;
  double sigma_y_;
  int y_dim_;
};

}  // namespace qsrlab::sdelab
