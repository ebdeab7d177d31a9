#include "qsrlab/optim.hpp"

#include <cmath>

namespace qsrlab::optim {

Eigen::VectorXd clip_gradient(const Eigen::VectorXd& g,
                              std::optional<double> threshold) {
  if (!threshold) return g;
  if (!(*threshold > 0.0)) throw std::invalid_argument("clip threshold must be > 0");
  const double norm = g.norm();
  if (norm <= *threshold) return g;
  return g * (*threshold / norm);
}

namespace {
void check_step_inputs(const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& grad,
                       const Eigen::VectorXd& buffer) {
  if (theta.size() != grad.size() || theta.size() != buffer.size())
    throw std::invalid_argument("parameter/gradient dimension mismatch");
  if (!grad.allFinite() || !theta.allFinite())
    throw NumericError("non-finite optimizer input", -1);
}
}  // namespace

Sgd::Sgd(int dim, SgdOptions options)
    : options_(options), velocity_(Eigen::VectorXd::Zero(dim)) {}

void Sgd::step(Eigen::VectorXd& theta, double lr,
               const Eigen::VectorXd& grad) {
  check_step_inputs(theta, grad, velocity_);
  if (lr < 0.0) throw std::invalid_argument("learning rate must be >= 0");
  Eigen::VectorXd g = clip_gradient(grad, options_.clip);
  if (options_.weight_decay != 0.0) g += options_.weight_decay * theta;
  velocity_ = options_.momentum * velocity_ + g;
  theta -= lr * velocity_;
}

std::unique_ptr<Optimizer> Sgd::clone() const {
  return std::make_unique<Sgd>(*this);
}

void Sgd::average_moments(const std::vector<const Optimizer*>& group) {
  velocity_.setZero();
  for (const Optimizer* o : group)
    velocity_ += static_cast<const Sgd*>(o)->velocity_;
  velocity_ /= static_cast<double>(group.size());
}

AdamW::AdamW(int dim, AdamWOptions options)
    : options_(options),
      m_(Eigen::VectorXd::Zero(dim)),
      v_(Eigen::VectorXd::Zero(dim)) {}

void AdamW::step(Eigen::VectorXd& theta, double lr,
                 const Eigen::VectorXd& grad) {
  check_step_inputs(theta, grad, m_);
  Eigen::VectorXd g = clip_gradient(grad, options_.clip);
  ++t_;
  m_ = options_.beta1 * m_ + (1.0 - options_.beta1) * g;
  v_ = options_.beta2 * v_ + (1.0 - options_.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const Eigen::ArrayXd m_hat = m_.array() / bc1;
  const Eigen::ArrayXd v_hat = v_.array() / bc2;
  theta -= lr * ((m_hat / (v_hat.sqrt() + options_.eps)).matrix() +
                 options_.weight_decay * theta);
}

std::unique_ptr<Optimizer> AdamW::clone() const {
  return std::make_unique<AdamW>(*this);
}

void AdamW::reset_moments() {
  m_.setZero();
  v_.setZero();
  t_ = 0;
}

void AdamW::average_moments(const std::vector<const Optimizer*>& group) {
  m_.setZero();
  v_.setZero();
  for (const Optimizer* o : group) {
    const auto* a = static_cast<const AdamW*>(o);
    m_ += a->m_;
    v_ += a->v_;
  }
  m_ /= static_cast<double>(group.size());
  v_ /= static_cast<double>(group.size());
}

}  // namespace qsrlab::optim
