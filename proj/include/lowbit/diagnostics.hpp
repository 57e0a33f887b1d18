#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <vector>

#include "lowbit/tensor.hpp"

namespace lowbit {

struct ErrorReport {
  // ||x~ - x||_2 / ||x||_2; empty when ||x|| = 0.
  std::optional<double> rel_l2;
  double max_abs = 0.0;
  // Fraction of reconstructed entries that are exactly zero.
  double zero_fraction = 0.0;
  std::size_t count = 0;
};

// Sums of squares for combining errors over several tensors.
class ErrorAccumulator {
 public:
  void add(const Eigen::Ref<const Eigen::ArrayXd>& exact, const Eigen::Ref<const Eigen::ArrayXd>& approx);
  ErrorReport report() const;
  bool empty() const { return count_ == 0; }

 private:
  double err_sq_ = 0.0;
  double ref_sq_ = 0.0;
  double max_abs_ = 0.0;
  std::size_t zeros_ = 0;
  std::size_t count_ = 0;
};

ErrorReport relative_error(const TensorD& exact, const TensorD& approx);

// h(v) = 1 / (sqrt(v) + eps), the factor a second moment contributes to an
// Adam update.
Eigen::ArrayXd inv_sqrt_transform(const Eigen::Ref<const Eigen::ArrayXd>& v, double eps);

// relative_error of h(v) against h(v~). zero_fraction reports zeros of v~
// itself. DomainError on negative entries.
ErrorReport inv_sqrt_error(const TensorD& v, const TensorD& v_approx, double eps = 1e-6);

// Mean over elements of |new - prev| / step. `step` is either one value or
// one per element; every step must be positive.
double bin_change_ratio(const TensorD& prev, const TensorD& next, const Eigen::Ref<const Eigen::ArrayXd>& step);
double bin_change_ratio(const TensorD& prev, const TensorD& next, double step);

struct Histogram {
  std::vector<double> edges;      // bins + 1 ascending edges
  std::vector<double> densities;  // count / (total * width)
};

// Equal-width density histogram over the data range (of log10(x) when
// `log10` is set). A constant sample gets a unit-width range centred on it.
Histogram histogram(const Eigen::Ref<const Eigen::ArrayXd>& x, std::size_t bins, bool log10 = false);

}  // namespace lowbit
