#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>

namespace qsrlab::optim {

/// Raised when a loss, gradient or parameter turns non-finite. The step
/// index is carried when the failure site knows it (negative otherwise).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::int64_t step)
      : std::runtime_error(
            step >= 0 ? what + " at step " + std::to_string(step) : what),
        step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

/// Rescales g to L2 norm `threshold` when it exceeds it; identity otherwise
/// (and always when the threshold is absent).
Eigen::VectorXd clip_gradient(const Eigen::VectorXd& g,
                              std::optional<double> threshold);

struct SgdOptions {
  double momentum = 0.0;
  double weight_decay = 0.0;  // coupled L2, added to the gradient
  std::optional<double> clip;
};

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
  std::optional<double> clip;
};

/// Single-step update rule plus its state; owned by exactly one worker.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Eigen::VectorXd& theta, double lr,
                    const Eigen::VectorXd& grad) = 0;
  virtual std::unique_ptr<Optimizer> clone() const = 0;
  virtual void reset_moments() = 0;
  /// Elementwise average of the moment buffers of `others` into this state.
  virtual void average_moments(
      const std::vector<const Optimizer*>& group) = 0;
};

class Sgd final : public Optimizer {
 public:
  Sgd(int dim, SgdOptions options);
  void step(Eigen::VectorXd& theta, double lr,
            const Eigen::VectorXd& grad) override;
  std::unique_ptr<Optimizer> clone() const override;
  void reset_moments() override { velocity_.setZero(); }
  void average_moments(const std::vector<const Optimizer*>& group) override;
  const Eigen::VectorXd& velocity() const { return velocity_; }

 private:
  SgdOptions options_;
  Eigen::VectorXd velocity_;
};

class AdamW final : public Optimizer {
 public:
  AdamW(int dim, AdamWOptions options);
  void step(Eigen::VectorXd& theta, double lr,
            const Eigen::VectorXd& grad) override;
  std::unique_ptr<Optimizer> clone() const override;
  void reset_moments() override;
  void average_moments(const std::vector<const Optimizer*>& group) override;
  std::int64_t steps_taken() const { return t_; }

 private:
  AdamWOptions options_;
  Eigen::VectorXd m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace qsrlab::optim
