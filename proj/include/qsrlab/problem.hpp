#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>

#include "qsrlab/manifold.hpp"

namespace qsrlab::engine {

/// A training problem evaluated on batches of sample keys. For finite
/// datasets the keys are example indices in [0, dataset_size); for
/// sample-on-the-fly problems (dataset_size() == 0) they are arbitrary
/// nonces supplied by the sampler, each standing for a fresh i.i.d. draw.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual int dim() const = 0;
  virtual std::int64_t dataset_size() const = 0;

  virtual double loss(const Eigen::VectorXd& theta,
                      std::span<const std::uint64_t> batch) const = 0;
  virtual Eigen::VectorXd grad(const Eigen::VectorXd& theta,
                               std::span<const std::uint64_t> batch) const = 0;

  /// Noise-free loss used for trace records and summaries.
  virtual double population_loss(const Eigen::VectorXd& theta) const = 0;

  /// Top Hessian eigenvalue at the manifold projection, for problems with a
  /// known minimizer manifold.
  virtual std::optional<double> sharpness(const Eigen::VectorXd& theta) const {
    (void)theta;
    return std::nullopt;
  }

  virtual Eigen::VectorXd initial_point(std::uint64_t seed) const = 0;
};

/// 0.5 (θ-θ*)^T A (θ-θ*) plus per-sample linear noise with covariance
/// diag(noise_scale^2). With zero noise this is exact gradient descent.
std::unique_ptr<Problem> make_noisy_quadratic(
    const Eigen::VectorXd& curvatures, const Eigen::VectorXd& minimizer,
    double noise_scale, std::int64_t dataset_size, std::uint64_t data_seed);

/// Engine adapter for the manifold toy: per-sample gradients carry additive
/// Gaussian noise with the toy's covariance; reports sharpness through the
/// analytic projection. `start` is the initial point for all seeds (the
/// initial x is jittered by init_jitter when nonzero).
std::unique_ptr<Problem> make_manifold_toy_problem(
    std::shared_ptr<const sdelab::ManifoldToy> toy, Eigen::VectorXd start,
    double init_jitter, std::int64_t dataset_size, std::uint64_t data_seed);

/// One-hidden-layer tanh classifier on a synthetic Gaussian-mixture dataset
/// with cross-entropy loss and hand-rolled backprop.
struct MlpSpec {
  int input_dim = 2;
  int hidden = 8;
  int classes = 2;
  std::int64_t dataset_size = 1024;
  double mixture_radius = 2.0;
  double mixture_std = 0.7;
  std::uint64_t data_seed = 0;
};
std::unique_ptr<Problem> make_mlp_classifier(const MlpSpec& spec);

}  // namespace qsrlab::engine
