#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lowbit/rng.hpp"
#include "lowbit/tensor.hpp"

namespace lowbit {

// A differentiable training objective over named parameter tensors.
// Problems are immutable after construction; all methods are thread-safe.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  // Deterministic starting point derived from the problem seed.
  virtual ParamList<double> initial_params() const = 0;
  // Full objective.
  virtual double loss(const ParamList<double>& params) const = 0;
  // Exact gradient of loss().
  virtual ParamList<double> gradient(const ParamList<double>& params) const = 0;
  // Unbiased gradient estimate; randomness comes only from `rng`.
  virtual ParamList<double> stochastic_gradient(const ParamList<double>& params, CounterRng& rng) const = 0;

  virtual std::optional<ParamList<double>> optimum() const { return std::nullopt; }
  virtual std::optional<double> smoothness() const { return std::nullopt; }
  // f* when known.
  virtual std::optional<double> optimal_loss() const { return std::nullopt; }
};

// f(theta) = 1/2 (theta - theta*)^T A (theta - theta*), A diagonal with
// eigenvalues spread linearly over [1, condition_number], so L equals the
// condition number. Stochastic gradients add N(0, sigma^2/d I) noise, i.e.
// E||g - grad f||^2 = sigma^2.
class QuadraticProblem : public Problem {
 public:
  QuadraticProblem(std::size_t dim, double condition_number, std::uint64_t seed, double noise_sigma = 0.0,
                   double init_distance = 1.0);

  std::string name() const override { return "quadratic"; }
  ParamList<double> initial_params() const override;
  double loss(const ParamList<double>& params) const override;
  ParamList<double> gradient(const ParamList<double>& params) const override;
  ParamList<double> stochastic_gradient(const ParamList<double>& params, CounterRng& rng) const override;
  std::optional<ParamList<double>> optimum() const override;
  std::optional<double> smoothness() const override { return eigenvalues_.maxCoeff(); }
  std::optional<double> optimal_loss() const override { return 0.0; }

  std::size_t dim() const { return static_cast<std::size_t>(optimum_.size()); }
  double noise_sigma() const { return noise_sigma_; }
  const Eigen::ArrayXd& eigenvalues() const { return eigenvalues_; }
  double loss_at(const Eigen::ArrayXd& theta) const;

 private:
  Eigen::ArrayXd eigenvalues_;
  Eigen::ArrayXd optimum_;
  Eigen::ArrayXd start_;
  double noise_sigma_;
};

// Binary logistic regression on synthetic data: Gaussian features, labels
// from a planted linear rule with logistic label noise. Parameters "weight"
// (d) and "bias" (1); loss is the mean cross-entropy.
class LogisticRegressionProblem : public Problem {
 public:
  LogisticRegressionProblem(std::size_t n_samples, std::size_t dim, std::uint64_t seed, std::size_t batch_size = 32);

  std::string name() const override { return "logreg"; }
  ParamList<double> initial_params() const override;
  double loss(const ParamList<double>& params) const override;
  ParamList<double> gradient(const ParamList<double>& params) const override;
  ParamList<double> stochastic_gradient(const ParamList<double>& params, CounterRng& rng) const override;

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  double loss_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const;
  ParamList<double> gradient_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const;

 private:
  Eigen::MatrixXd features_;  // n x d
  Eigen::VectorXd labels_;    // 0/1
  std::size_t batch_size_;
};

// tanh MLP regression with a linear output layer and mean squared error
// loss 1/(2n) sum ||y_hat - y||^2. Layer l has "layer<l>.weight"
// (fan_in x fan_out) and "layer<l>.bias" (fan_out). Targets come from a
// random teacher network of the same shape scaled by `target_scale`.
class MlpProblem : public Problem {
 public:
  MlpProblem(std::vector<std::size_t> layer_sizes, std::size_t n_samples, std::uint64_t seed,
             std::size_t batch_size = 32, double target_scale = 1.0);

  std::string name() const override { return "mlp"; }
  ParamList<double> initial_params() const override;
  double loss(const ParamList<double>& params) const override;
  ParamList<double> gradient(const ParamList<double>& params) const override;
  ParamList<double> stochastic_gradient(const ParamList<double>& params, CounterRng& rng) const override;

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  double loss_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const;
  ParamList<double> gradient_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const;

 private:
  double forward_backward(const ParamList<double>& params, const std::vector<std::size_t>& rows,
                          ParamList<double>* grads) const;

  std::vector<std::size_t> sizes_;
  Eigen::MatrixXd inputs_;   // n x in
  Eigen::MatrixXd targets_;  // n x out
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace lowbit
