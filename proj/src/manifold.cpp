#include "qsrlab/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "qsrlab/sdelab.hpp"

namespace qsrlab::sdelab {

Eigen::VectorXd ManifoldProblem::third_derivative(
    const Eigen::VectorXd& theta, const Eigen::MatrixXd& m) const {
  const int d = dim();
  const double delta = 1e-4 * (1.0 + theta.norm());
  Eigen::VectorXd out(d);
  Eigen::VectorXd probe = theta;
  for (int i = 0; i < d; ++i) {
    probe(i) = theta(i) + delta;
    const Eigen::MatrixXd hp = hessian(probe);
    probe(i) = theta(i) - delta;
    const Eigen::MatrixXd hm = hessian(probe);
    probe(i) = theta(i);
    out(i) = ((hp - hm) / (2.0 * delta)).cwiseProduct(m).sum();
  }
  return out;
}

Eigen::MatrixXd ManifoldProblem::noise_covariance_sqrt(
    const Eigen::VectorXd& theta) const {
  const Eigen::MatrixXd sigma = noise_covariance(theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("noise covariance eigendecomposition failed");
  Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() *
         es.eigenvectors().transpose();
}

std::optional<Eigen::VectorXd> ManifoldProblem::project(
    const Eigen::VectorXd& theta) const {
  return gradient_flow_projection(*this, theta, 1e-9);
}

ManifoldToy::ManifoldToy(double a, double sigma_x, double sigma_y, int y_dim)
    : a_(a), sigma_x_(sigma_x), sigma_y_(sigma_y), y_dim_(y_dim) {
  if (!(a > 0.0)) throw std::invalid_argument("curvature offset a must be > 0");
  if (sigma_x < 0.0 || sigma_y < 0.0)
    throw std::invalid_argument("noise scales must be >= 0");
  if (y_dim < 1) throw std::invalid_argument("y_dim must be >= 1");
}

double ManifoldToy::loss(const Eigen::VectorXd& theta) const {
  const double x = theta(0);
  const double ysq = theta.tail(y_dim_).squaredNorm();
  return 0.5 * curvature(x) * ysq;
}

Eigen::VectorXd ManifoldToy::grad(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g(dim());
  grad_into(theta, g);
  return g;
}

void ManifoldToy::grad_into(const Eigen::VectorXd& theta,
                            Eigen::VectorXd& out) const {
  const double x = theta(0);
  const double ysq = theta.tail(y_dim_).squaredNorm();
  out(0) = x * ysq;
  out.tail(y_dim_) = curvature(x) * theta.tail(y_dim_);
}

Eigen::MatrixXd ManifoldToy::hessian(const Eigen::VectorXd& theta) const {
  const double x = theta(0);
  const double ysq = theta.tail(y_dim_).squaredNorm();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
  h(0, 0) = ysq;
  for (int i = 0; i < y_dim_; ++i) {
    h(0, 1 + i) = h(1 + i, 0) = 2.0 * x * theta(1 + i);
    h(1 + i, 1 + i) = curvature(x);
  }
  return h;
}

Eigen::VectorXd ManifoldToy::third_derivative(const Eigen::VectorXd& theta,
                                              const Eigen::MatrixXd& m) const {
  // Nonzero third derivatives: L_xxy_i = 2 y_i, L_xy_iy_j = 2 x δ_ij.
  const double x = theta(0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  double tr_yy = 0.0;
  for (int i = 0; i < y_dim_; ++i) tr_yy += m(1 + i, 1 + i);
  double xy_mixed = 0.0;
  for (int i = 0; i < y_dim_; ++i) xy_mixed += theta(1 + i) * m(0, 1 + i);
  out(0) = 2.0 * x * tr_yy + 4.0 * xy_mixed;  // (x,y_i) and (y_i,x) pairs
  for (int i = 0; i < y_dim_; ++i)
    out(1 + i) = 2.0 * theta(1 + i) * m(0, 0) + 4.0 * x * m(0, 1 + i);
  return out;
}

Eigen::MatrixXd ManifoldToy::noise_covariance(const Eigen::VectorXd&) const {
  Eigen::VectorXd diag(dim());
  diag(0) = sigma_x_ * sigma_x_;
  diag.tail(y_dim_).setConstant(sigma_y_ * sigma_y_);
  return diag.asDiagonal();
}

Eigen::MatrixXd ManifoldToy::noise_covariance_sqrt(
    const Eigen::VectorXd&) const {
  Eigen::VectorXd diag(dim());
  diag(0) = sigma_x_;
  diag.tail(y_dim_).setConstant(sigma_y_);
  return diag.asDiagonal();
}

double ManifoldToy::manifold_distance(const Eigen::VectorXd& theta) const {
  return theta.tail(y_dim_).norm();
}

double ManifoldToy::project_x(double x, double y_sq) const {
  // Along gradient flow trajectories, d(2a ln|x| + x^2) = d(||y||^2), so the
  // limit satisfies G(|xe|) = G(|x|) - y_sq with G(u) = 2a ln u + u^2 and the
  // sign of x preserved (x = 0 is invariant).
  if (x == 0.0) return 0.0;
  const double sign = x > 0.0 ? 1.0 : -1.0;
  const double u0 = std::abs(x);
  const double target = 2.0 * a_ * std::log(u0) + u0 * u0 - y_sq;
  double u = u0;
  for (int it = 0; it < 100; ++it) {
    const double f = 2.0 * a_ * std::log(u) + u * u - target;
    const double fp = 2.0 * a_ / u + 2.0 * u;
    double step = f / fp;
    // Newton can overshoot past zero while u is far from the root.
    double next = u - step;
    if (next <= 0.0) next = 0.5 * u;
    if (std::abs(next - u) <= 1e-15 * (1.0 + u)) {
      u = next;
      break;
    }
    u = next;
  }
  return sign * u;
}

std::optional<Eigen::VectorXd> ManifoldToy::project(
    const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  out(0) = project_x(theta(0), theta.tail(y_dim_).squaredNorm());
  return out;
}

std::optional<Eigen::MatrixXd> ManifoldToy::analytic_projection_jacobian(
    const Eigen::VectorXd& theta) const {
  // Phi_x = G^{-1}(G(|x|) - ||y||^2):  dPhi_x/dx = G'(|x|)/G'(|xe|),
  // dPhi_x/dy_i = -2 y_i / G'(|xe|) * sign(x); rows for y outputs vanish.
  const double x = theta(0);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim(), dim());
  if (x == 0.0) {
    // Limit along the invariant line: Phi_x ~ x * exp(-||y||^2 / 2a).
    j(0, 0) = std::exp(-theta.tail(y_dim_).squaredNorm() / (2.0 * a_));
    return j;
  }
  const double xe = project_x(x, theta.tail(y_dim_).squaredNorm());
  const double gp_x = 2.0 * a_ / std::abs(x) + 2.0 * std::abs(x);
  const double gp_e = 2.0 * a_ / std::abs(xe) + 2.0 * std::abs(xe);
  j(0, 0) = gp_x / gp_e;
  const double sign = x > 0.0 ? 1.0 : -1.0;
  for (int i = 0; i < y_dim_; ++i)
    j(0, 1 + i) = -2.0 * theta(1 + i) / gp_e * sign;
  return j;
}

std::optional<Eigen::VectorXd> ManifoldToy::analytic_projection_hessian_applied(
    const Eigen::VectorXd& zeta, const Eigen::MatrixXd& m) const {
  // Valid on the manifold (y = 0): the only nonzero second derivatives of
  // Phi_x are d²Phi_x/dy_i² = -h'(x)/(2 h(x)).
  const double x = zeta(0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  double tr_yy = 0.0;
  for (int i = 0; i < y_dim_; ++i) tr_yy += m(1 + i, 1 + i);
  out(0) = -(x / curvature(x)) * tr_yy;
  return out;
}

}  // namespace qsrlab::sdelab
