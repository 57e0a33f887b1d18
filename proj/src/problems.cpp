#include "lowbit/problems.hpp"

#include <cmath>

#include "lowbit/errors.hpp"

namespace lowbit {
namespace {

Eigen::ArrayXd normal_array(CounterRng& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::ArrayXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = scale * rng.normal();
  return out;
}

Eigen::MatrixXd normal_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd out(rows, cols);
  // Fill row-major so the sample matches the flat parameter layout.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = scale * rng.normal();
  }
  return out;
}

std::vector<std::size_t> sample_rows(CounterRng& rng, std::size_t n, std::size_t batch) {
  std::vector<std::size_t> rows(batch);
  for (auto& r : rows) r = static_cast<std::size_t>(rng() % n);
  return rows;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

const TensorD& find_param(const ParamList<double>& params, const std::string& name) {
  for (const auto& p : params) {
    if (p.name == name) return p.value;
  }
  throw ShapeError("missing parameter '" + name + "'");
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------- quadratic

QuadraticProblem::QuadraticProblem(std::size_t dim, double condition_number, std::uint64_t seed, double noise_sigma,
                                   double init_distance)
    : noise_sigma_(noise_sigma) {
  if (dim < 1) throw ConfigError("quadratic: dimension must be at least 1");
  if (!(condition_number >= 1.0)) throw ConfigError("quadratic: condition number must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("quadratic: noise sigma must be non-negative");
  const auto d = static_cast<Eigen::Index>(dim);
  eigenvalues_ = dim == 1 ? Eigen::ArrayXd(Eigen::ArrayXd::Constant(1, condition_number))
                          : Eigen::ArrayXd(Eigen::ArrayXd::LinSpaced(d, 1.0, condition_number));
  CounterRng rng(seed, "quadratic", 0);
  optimum_ = normal_array(rng, d);
  const Eigen::ArrayXd offset = normal_array(rng, d);
  const double norm = offset.matrix().norm();
  start_ = optimum_ + (norm > 0.0 ? init_distance / norm : 0.0) * offset;
}

ParamList<double> QuadraticProblem::initial_params() const { return {{"theta", TensorD({dim()}, start_)}}; }

double QuadraticProblem::loss_at(const Eigen::ArrayXd& theta) const {
  const Eigen::ArrayXd diff = theta - optimum_;
  return 0.5 * (eigenvalues_ * diff.square()).sum();
}

double QuadraticProblem::loss(const ParamList<double>& params) const {
  return loss_at(find_param(params, "theta").values);
}

ParamList<double> QuadraticProblem::gradient(const ParamList<double>& params) const {
  const TensorD& theta = find_param(params, "theta");
  if (theta.size() != optimum_.size()) throw ShapeError("quadratic: parameter dimension mismatch");
  return {{"theta", TensorD(theta.shape, eigenvalues_ * (theta.values - optimum_))}};
}

ParamList<double> QuadraticProblem::stochastic_gradient(const ParamList<double>& params, CounterRng& rng) const {
  ParamList<double> g = gradient(params);
  if (noise_sigma_ > 0.0) {
    const double per_coord = noise_sigma_ / std::sqrt(static_cast<double>(dim()));
    g[0].value.values += normal_array(rng, g[0].value.size(), per_coord);
  }
  return g;
}

std::optional<ParamList<double>> QuadraticProblem::optimum() const {
  return ParamList<double>{{"theta", TensorD({dim()}, optimum_)}};
}

// ------------------------------------------------------- logistic regression

LogisticRegressionProblem::LogisticRegressionProblem(std::size_t n_samples, std::size_t dim, std::uint64_t seed,
                                                     std::size_t batch_size)
    : batch_size_(batch_size) {
  if (n_samples < 1 || dim < 1) throw ConfigError("logreg: n_samples and d must be at least 1");
  if (batch_size < 1) throw ConfigError("logreg: batch size must be at least 1");
  CounterRng rng(seed, "logreg", 0);
  const auto n = static_cast<Eigen::Index>(n_samples);
  const auto d = static_cast<Eigen::Index>(dim);
  const Eigen::VectorXd planted = normal_array(rng, d, 1.0 / std::sqrt(static_cast<double>(dim))).matrix();
  features_ = normal_matrix(rng, n, d);
  labels_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double margin = 3.0 * features_.row(i).dot(planted) + 0.5 * rng.normal();
    labels_[i] = margin > 0.0 ? 1.0 : 0.0;
  }
}

ParamList<double> LogisticRegressionProblem::initial_params() const {
  return {{"weight", TensorD::zeros({static_cast<std::size_t>(features_.cols())})}, {"bias", TensorD::zeros({1})}};
}

double LogisticRegressionProblem::loss_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const {
  const Eigen::VectorXd w = find_param(params, "weight").values.matrix();
  const double b = find_param(params, "bias").values[0];
  if (w.size() != features_.cols()) throw ShapeError("logreg: weight dimension mismatch");
  double total = 0.0;
  for (std::size_t r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    const double z = features_.row(i).dot(w) + b;
    total += softplus(z) - labels_[i] * z;
  }
  return total / static_cast<double>(rows.size());
}

ParamList<double> LogisticRegressionProblem::gradient_on(const ParamList<double>& params,
                                                         const std::vector<std::size_t>& rows) const {
  const Eigen::VectorXd w = find_param(params, "weight").values.matrix();
  const double b = find_param(params, "bias").values[0];
  if (w.size() != features_.cols()) throw ShapeError("logreg: weight dimension mismatch");
  Eigen::VectorXd gw = Eigen::VectorXd::Zero(w.size());
  double gb = 0.0;
  for (std::size_t r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    const double residual = sigmoid(features_.row(i).dot(w) + b) - labels_[i];
    gw += residual * features_.row(i).transpose();
    gb += residual;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  return {{"weight", TensorD({static_cast<std::size_t>(w.size())}, (gw * inv).array())},
          {"bias", TensorD({1}, Eigen::ArrayXd::Constant(1, gb * inv))}};
}

double LogisticRegressionProblem::loss(const ParamList<double>& params) const {
  return loss_on(params, all_rows(static_cast<std::size_t>(features_.rows())));
}

ParamList<double> LogisticRegressionProblem::gradient(const ParamList<double>& params) const {
  return gradient_on(params, all_rows(static_cast<std::size_t>(features_.rows())));
}

ParamList<double> LogisticRegressionProblem::stochastic_gradient(const ParamList<double>& params,
                                                                 CounterRng& rng) const {
  return gradient_on(params, sample_rows(rng, static_cast<std::size_t>(features_.rows()), batch_size_));
}

// ----------------------------------------------------------------------- MLP

MlpProblem::MlpProblem(std::vector<std::size_t> layer_sizes, std::size_t n_samples, std::uint64_t seed,
                       std::size_t batch_size, double target_scale)
    : sizes_(std::move(layer_sizes)), batch_size_(batch_size), seed_(seed) {
  if (sizes_.size() < 3) throw ConfigError("mlp: need input, at least one hidden layer, and output sizes");
  for (std::size_t s : sizes_) {
    if (s < 1) throw ConfigError("mlp: layer sizes must be positive");
  }
  if (n_samples < 1 || batch_size < 1) throw ConfigError("mlp: n_samples and batch size must be at least 1");
  CounterRng rng(seed, "mlp-data", 0);
  const auto n = static_cast<Eigen::Index>(n_samples);
  inputs_ = normal_matrix(rng, n, static_cast<Eigen::Index>(sizes_.front()));
  // Teacher network with the same architecture.
  CounterRng teacher_rng(seed, "mlp-teacher", 0);
  ParamList<double> teacher;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(sizes_[l]);
    const auto fan_out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const Eigen::MatrixXd w = normal_matrix(teacher_rng, fan_in, fan_out, 1.5 / std::sqrt(static_cast<double>(fan_in)));
    RowMajorMatrix<double> w_rm = w;
    teacher.push_back({"layer" + std::to_string(l) + ".weight",
                       TensorD({sizes_[l], sizes_[l + 1]}, Eigen::Map<Eigen::ArrayXd>(w_rm.data(), w_rm.size()))});
    teacher.push_back({"layer" + std::to_string(l) + ".bias", TensorD({sizes_[l + 1]}, normal_array(teacher_rng, fan_out, 0.1))});
  }
  targets_ = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(sizes_.back()));
  // Forward pass of the teacher.
  Eigen::MatrixXd h = inputs_;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto& w = teacher[2 * l].value;
    const auto& b = teacher[2 * l + 1].value;
    Eigen::MatrixXd z = h * w.matrix();
    z.rowwise() += b.values.matrix().transpose();
    h = (l + 2 < sizes_.size()) ? Eigen::MatrixXd(z.array().tanh().matrix()) : z;
  }
  targets_ = target_scale * h;
}

ParamList<double> MlpProblem::initial_params() const {
  CounterRng rng(seed_, "mlp-init", 0);
  ParamList<double> params;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(sizes_[l]);
    const auto fan_out = static_cast<Eigen::Index>(sizes_[l + 1]);
    params.push_back({"layer" + std::to_string(l) + ".weight",
                      TensorD({sizes_[l], sizes_[l + 1]},
                              normal_array(rng, fan_in * fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in))))});
    params.push_back({"layer" + std::to_string(l) + ".bias", TensorD::zeros({sizes_[l + 1]})});
  }
  return params;
}

double MlpProblem::forward_backward(const ParamList<double>& params, const std::vector<std::size_t>& rows,
                                    ParamList<double>* grads) const {
  const std::size_t layers = sizes_.size() - 1;
  if (params.size() != 2 * layers) throw ShapeError("mlp: expected " + std::to_string(2 * layers) + " parameters");
  const auto batch = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(batch, inputs_.cols());
  Eigen::MatrixXd y(batch, targets_.cols());
  for (Eigen::Index i = 0; i < batch; ++i) {
    x.row(i) = inputs_.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    y.row(i) = targets_.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
  }
  // activations[l] is the input to layer l.
  std::vector<Eigen::MatrixXd> activations{x};
  for (std::size_t l = 0; l < layers; ++l) {
    const TensorD& w = params[2 * l].value;
    const TensorD& b = params[2 * l + 1].value;
    if (w.shape != Shape{sizes_[l], sizes_[l + 1]} || b.shape != Shape{sizes_[l + 1]}) {
      throw ShapeError("mlp: parameter shape mismatch at layer " + std::to_string(l));
    }
    Eigen::MatrixXd z = activations.back() * w.matrix();
    z.rowwise() += b.values.matrix().transpose();
    activations.push_back(l + 1 < layers ? Eigen::MatrixXd(z.array().tanh().matrix()) : z);
  }
  const Eigen::MatrixXd residual = activations.back() - y;
  const double loss = 0.5 * residual.squaredNorm() / static_cast<double>(batch);
  if (!grads) return loss;

  grads->assign(params.begin(), params.end());
  Eigen::MatrixXd delta = residual / static_cast<double>(batch);
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd gw = activations[l].transpose() * delta;
    const RowMajorMatrix<double> gw_rm = gw;
    (*grads)[2 * l].value.values = Eigen::Map<const Eigen::ArrayXd>(gw_rm.data(), gw_rm.size());
    (*grads)[2 * l + 1].value.values = delta.colwise().sum().transpose().array();
    if (l > 0) {
      const Eigen::MatrixXd back = delta * params[2 * l].value.matrix().transpose();
      delta = (back.array() * (1.0 - activations[l].array().square())).matrix();
    }
  }
  return loss;
}

double MlpProblem::loss_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const {
  return forward_backward(params, rows, nullptr);
}

ParamList<double> MlpProblem::gradient_on(const ParamList<double>& params, const std::vector<std::size_t>& rows) const {
  ParamList<double> grads;
  forward_backward(params, rows, &grads);
  return grads;
}

double MlpProblem::loss(const ParamList<double>& params) const {
  return loss_on(params, all_rows(static_cast<std::size_t>(inputs_.rows())));
}

ParamList<double> MlpProblem::gradient(const ParamList<double>& params) const {
  return gradient_on(params, all_rows(static_cast<std::size_t>(inputs_.rows())));
}

ParamList<double> MlpProblem::stochastic_gradient(const ParamList<double>& params, CounterRng& rng) const {
  return gradient_on(params, sample_rows(rng, static_cast<std::size_t>(inputs_.rows()), batch_size_));
}

}  // namespace lowbit
