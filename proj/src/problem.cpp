#include "qsrlab/problem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qsrlab/rng.hpp"
#include "qsrlab/sdelab.hpp"

namespace qsrlab::engine {

namespace {

// Per-sample noise vector for a key: for finite datasets the key is an
// example index and the draw is a fixed property of the dataset; for
// dataset_size == 0 every key is a fresh nonce.
Eigen::VectorXd sample_noise(int dim, std::uint64_t data_seed,
                             std::uint64_t key) {
  RngStream rng = RngStream::keyed({data_seed, stream_tag::data, key});
  Eigen::VectorXd z(dim);
  for (int i = 0; i < dim; ++i) z(i) = rng.next_normal();
  return z;
}

class NoisyQuadratic final : public Problem {
 public:
  NoisyQuadratic(Eigen::VectorXd curvatures, Eigen::VectorXd minimizer,
                 double noise_scale, std::int64_t dataset_size,
                 std::uint64_t data_seed)
      : curvatures_(std::move(curvatures)),
        minimizer_(std::move(minimizer)),
        noise_scale_(noise_scale),
        dataset_size_(dataset_size),
        data_seed_(data_seed) {
    if (curvatures_.size() != minimizer_.size())
      throw std::invalid_argument("curvature/minimizer dimension mismatch");
    if ((curvatures_.array() <= 0.0).any())
      throw std::invalid_argument("curvatures must be positive");
    if (noise_scale_ < 0.0) throw std::invalid_argument("noise_scale must be >= 0");
  }

  int dim() const override { return static_cast<int>(curvatures_.size()); }
  std::int64_t dataset_size() const override { return dataset_size_; }

  double loss(const Eigen::VectorXd& theta,
              std::span<const std::uint64_t> batch) const override {
    // Per-sample loss: L(theta) + eps_key . theta (affine noise).
    return population_loss(theta) + mean_noise(batch).dot(theta);
  }

  Eigen::VectorXd grad(const Eigen::VectorXd& theta,
                       std::span<const std::uint64_t> batch) const override {
    Eigen::VectorXd g =
        curvatures_.cwiseProduct(theta - minimizer_) + mean_noise(batch);
    return g;
  }

  double population_loss(const Eigen::VectorXd& theta) const override {
    const Eigen::VectorXd d = theta - minimizer_;
    return 0.5 * d.dot(curvatures_.cwiseProduct(d));
  }

  Eigen::VectorXd initial_point(std::uint64_t seed) const override {
    RngStream rng = RngStream::keyed({seed, stream_tag::init});
    Eigen::VectorXd offset(dim());
    for (int i = 0; i < dim(); ++i) offset(i) = rng.next_normal();
    return minimizer_ + offset;
  }

 private:
  Eigen::VectorXd mean_noise(std::span<const std::uint64_t> batch) const {
    Eigen::VectorXd noise = Eigen::VectorXd::Zero(dim());
    if (noise_scale_ == 0.0 || batch.empty()) return noise;
    for (std::uint64_t key : batch)
      noise += sample_noise(dim(), data_seed_, key);
    noise *= noise_scale_ / static_cast<double>(batch.size());
    return noise;
  }

  Eigen::VectorXd curvatures_;
  Eigen::VectorXd minimizer_;
  double noise_scale_;
  std::int64_t dataset_size_;
  std::uint64_t data_seed_;
};

class ManifoldToyProblem final : public Problem {
 public:
  ManifoldToyProblem(std::shared_ptr<const sdelab::ManifoldToy> toy,
                     Eigen::VectorXd start, double init_jitter,
                     std::int64_t dataset_size, std::uint64_t data_seed)
      : toy_(std::move(toy)),
        start_(std::move(start)),
        init_jitter_(init_jitter),
        dataset_size_(dataset_size),
        data_seed_(data_seed) {
    if (start_.size() != toy_->dim())
      throw std::invalid_argument("start point dimension mismatch");
    noise_sqrt_ = toy_->noise_covariance_sqrt(start_);
  }

  int dim() const override { return toy_->dim(); }
  std::int64_t dataset_size() const override { return dataset_size_; }

  double loss(const Eigen::VectorXd& theta,
              std::span<const std::uint64_t> batch) const override {
    return toy_->loss(theta) + mean_noise(batch).dot(theta);
  }

  Eigen::VectorXd grad(const Eigen::VectorXd& theta,
                       std::span<const std::uint64_t> batch) const override {
    return toy_->grad(theta) + mean_noise(batch);
  }

  double population_loss(const Eigen::VectorXd& theta) const override {
    return toy_->loss(theta);
  }

  std::optional<double> sharpness(const Eigen::VectorXd& theta) const override {
    const auto zeta = toy_->project(theta);
    if (!zeta) return std::nullopt;
    return sdelab::sharpness(*toy_, *zeta);
  }

  Eigen::VectorXd initial_point(std::uint64_t seed) const override {
    Eigen::VectorXd p = start_;
    if (init_jitter_ != 0.0) {
      RngStream rng = RngStream::keyed({seed, stream_tag::init});
      p(0) += init_jitter_ * rng.next_normal();
    }
    return p;
  }

 private:
  Eigen::VectorXd mean_noise(std::span<const std::uint64_t> batch) const {
    Eigen::VectorXd noise = Eigen::VectorXd::Zero(dim());
    if (batch.empty()) return noise;
    for (std::uint64_t key : batch)
      noise += sample_noise(dim(), data_seed_, key);
    return noise_sqrt_ * noise / static_cast<double>(batch.size());
  }

  std::shared_ptr<const sdelab::ManifoldToy> toy_;
  Eigen::VectorXd start_;
  double init_jitter_;
  std::int64_t dataset_size_;
  std::uint64_t data_seed_;
  Eigen::MatrixXd noise_sqrt_;
};

class MlpClassifier final : public Problem {
 public:
  explicit MlpClassifier(const MlpSpec& spec) : spec_(spec) {
    if (spec.input_dim < 1 || spec.hidden < 1 || spec.classes < 2)
      throw std::invalid_argument("bad MLP shape");
    if (spec.dataset_size < 1)
      throw std::invalid_argument("MLP needs a finite dataset");
    build_dataset();
  }

  int dim() const override {
    return spec_.input_dim * spec_.hidden + spec_.hidden +
           spec_.hidden * spec_.classes + spec_.classes;
  }
  std::int64_t dataset_size() const override { return spec_.dataset_size; }

  double loss(const Eigen::VectorXd& theta,
              std::span<const std::uint64_t> batch) const override {
    double total = 0.0;
    for (std::uint64_t key : batch) total += example_loss(theta, key, nullptr);
    return total / static_cast<double>(batch.size());
  }

  Eigen::VectorXd grad(const Eigen::VectorXd& theta,
                       std::span<const std::uint64_t> batch) const override {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
    Eigen::VectorXd gi(dim());
    for (std::uint64_t key : batch) {
      example_loss(theta, key, &gi);
      g += gi;
    }
    return g / static_cast<double>(batch.size());
  }

  double population_loss(const Eigen::VectorXd& theta) const override {
    double total = 0.0;
    for (std::int64_t i = 0; i < spec_.dataset_size; ++i)
      total += example_loss(theta, static_cast<std::uint64_t>(i), nullptr);
    return total / static_cast<double>(spec_.dataset_size);
  }

  Eigen::VectorXd initial_point(std::uint64_t seed) const override {
    RngStream rng = RngStream::keyed({seed, stream_tag::init});
    Eigen::VectorXd theta(dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec_.input_dim));
    for (int i = 0; i < theta.size(); ++i) theta(i) = scale * rng.next_normal();
    return theta;
  }

 private:
  void build_dataset() {
    features_.resize(spec_.dataset_size, spec_.input_dim);
    labels_.resize(spec_.dataset_size);
    RngStream rng = RngStream::keyed({spec_.data_seed, stream_tag::data});
    for (std::int64_t i = 0; i < spec_.dataset_size; ++i) {
      const int label = static_cast<int>(rng.next_below(spec_.classes));
      const double angle = 2.0 * std::numbers::pi * label / spec_.classes;
      labels_(i) = label;
      for (int jdim = 0; jdim < spec_.input_dim; ++jdim) {
        double center = 0.0;
        if (jdim == 0) center = spec_.mixture_radius * std::cos(angle);
        if (jdim == 1) center = spec_.mixture_radius * std::sin(angle);
        features_(i, jdim) = center + spec_.mixture_std * rng.next_normal();
      }
    }
  }

  // Forward + optional backward for one example; returns the CE loss.
  double example_loss(const Eigen::VectorXd& theta, std::uint64_t key,
                      Eigen::VectorXd* grad_out) const {
    const std::int64_t idx = static_cast<std::int64_t>(key);
    if (idx < 0 || idx >= spec_.dataset_size)
      throw std::out_of_range("example index outside dataset");
    const int in = spec_.input_dim, nh = spec_.hidden, nc = spec_.classes;
    const auto w1 = Eigen::Map<const Eigen::MatrixXd>(theta.data(), nh, in);
    const auto b1 = Eigen::Map<const Eigen::VectorXd>(theta.data() + nh * in, nh);
    const auto w2 = Eigen::Map<const Eigen::MatrixXd>(
        theta.data() + nh * in + nh, nc, nh);
    const auto b2 = Eigen::Map<const Eigen::VectorXd>(
        theta.data() + nh * in + nh + nc * nh, nc);

    const Eigen::VectorXd x = features_.row(idx).transpose();
    const Eigen::VectorXd pre = w1 * x + b1;
    const Eigen::VectorXd hid = pre.array().tanh().matrix();
    Eigen::VectorXd logits = w2 * hid + b2;
    const double zmax = logits.maxCoeff();
    const Eigen::ArrayXd shifted = logits.array() - zmax;
    const Eigen::ArrayXd expz = shifted.exp();
    const double zsum = expz.sum();
    const int label = labels_(idx);
    const double loss = -(shifted(label) - std::log(zsum));

    if (grad_out) {
      Eigen::VectorXd dlogits = (expz / zsum).matrix();
      dlogits(label) -= 1.0;
      const Eigen::VectorXd dhid = w2.transpose() * dlogits;
      const Eigen::VectorXd dpre =
          dhid.cwiseProduct((1.0 - hid.array().square()).matrix());
      grad_out->resize(dim());
      Eigen::Map<Eigen::MatrixXd>(grad_out->data(), nh, in) =
          dpre * x.transpose();
      Eigen::Map<Eigen::VectorXd>(grad_out->data() + nh * in, nh) = dpre;
      Eigen::Map<Eigen::MatrixXd>(grad_out->data() + nh * in + nh, nc, nh) =
          dlogits * hid.transpose();
      Eigen::Map<Eigen::VectorXd>(grad_out->data() + nh * in + nh + nc * nh,
                                  nc) = dlogits;
    }
    return loss;
  }

  MlpSpec spec_;
  Eigen::MatrixXd features_;
  Eigen::VectorXi labels_;
};

}  // namespace

std::unique_ptr<Problem> make_noisy_quadratic(const Eigen::VectorXd& curvatures,
                                              const Eigen::VectorXd& minimizer,
                                              double noise_scale,
                                              std::int64_t dataset_size,
                                              std::uint64_t data_seed) {
  return std::make_unique<NoisyQuadratic>(curvatures, minimizer, noise_scale,
                                          dataset_size, data_seed);
}

std::unique_ptr<Problem> make_manifold_toy_problem(
    std::shared_ptr<const sdelab::ManifoldToy> toy, Eigen::VectorXd start,
    double init_jitter, std::int64_t dataset_size, std::uint64_t data_seed) {
  return std::make_unique<ManifoldToyProblem>(std::move(toy), std::move(start),
                                              init_jitter, dataset_size,
                                              data_seed);
}

std::unique_ptr<Problem> make_mlp_classifier(const MlpSpec& spec) {
  return std::make_unique<MlpClassifier>(spec);
}

}  // namespace qsrlab::engine
