#include "lowbit/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace lowbit {

void ErrorAccumulator::add(const Eigen::Ref<const Eigen::ArrayXd>& exact,
                           const Eigen::Ref<const Eigen::ArrayXd>& approx) {
  if (exact.size() != approx.size()) throw ShapeError("error accumulator: size mismatch");
  if (exact.size() == 0) return;
  const Eigen::ArrayXd diff = approx - exact;
  err_sq_ += diff.square().sum();
  ref_sq_ += exact.square().sum();
  max_abs_ = std::max(max_abs_, diff.abs().maxCoeff());
  zeros_ += static_cast<std::size_t>((approx == 0.0).count());
  count_ += static_cast<std::size_t>(exact.size());
}

ErrorReport ErrorAccumulator::report() const {
  ErrorReport r;
  if (ref_sq_ > 0.0) r.rel_l2 = std::sqrt(err_sq_) / std::sqrt(ref_sq_);
  r.max_abs = max_abs_;
  r.zero_fraction = count_ ? static_cast<double>(zeros_) / static_cast<double>(count_) : 0.0;
  r.count = count_;
  return r;
}

ErrorReport relative_error(const TensorD& exact, const TensorD& approx) {
  require_same_shape(exact, approx, "relative_error");
  ErrorAccumulator acc;
  acc.add(exact.values, approx.values);
  return acc.report();
}

Eigen::ArrayXd inv_sqrt_transform(const Eigen::Ref<const Eigen::ArrayXd>& v, double eps) {
  return (v.sqrt() + eps).inverse();
}

ErrorReport inv_sqrt_error(const TensorD& v, const TensorD& v_approx, double eps) {
  require_same_shape(v, v_approx, "inv_sqrt_error");
  if ((v.values < 0.0).any() || (v_approx.values < 0.0).any()) {
    throw DomainError("inv_sqrt_error: second moments must be non-negative");
  }
  ErrorAccumulator acc;
  acc.add(inv_sqrt_transform(v.values, eps), inv_sqrt_transform(v_approx.values, eps));
  ErrorReport r = acc.report();
  r.zero_fraction = v_approx.size() ? static_cast<double>((v_approx.values == 0.0).count()) /
                                          static_cast<double>(v_approx.size())
                                    : 0.0;
  return r;
}

double bin_change_ratio(const TensorD& prev, const TensorD& next, const Eigen::Ref<const Eigen::ArrayXd>& step) {
  require_same_shape(prev, next, "bin_change_ratio");
  if (step.size() != 1 && step.size() != prev.size()) throw ShapeError("bin_change_ratio: step size mismatch");
  if ((step <= 0.0).any()) throw DomainError("bin_change_ratio: quantization step must be positive");
  if (prev.size() == 0) return 0.0;
  const Eigen::ArrayXd moved = (next.values - prev.values).abs();
  if (step.size() == 1) return (moved / step[0]).mean();
  return (moved / step).mean();
}

double bin_change_ratio(const TensorD& prev, const TensorD& next, double step) {
  Eigen::ArrayXd s(1);
  s[0] = step;
  return bin_change_ratio(prev, next, s);
}

Histogram histogram(const Eigen::Ref<const Eigen::ArrayXd>& x, std::size_t bins, bool log10) {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  if (x.size() == 0) throw ShapeError("histogram of an empty sample");
  Eigen::ArrayXd data = x;
  if (log10) {
    if ((data <= 0.0).any()) throw DomainError("log10 histogram needs strictly positive data");
    data = data.log10();
  }
  double lo = data.minCoeff();
  double hi = data.maxCoeff();
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;
  std::vector<std::size_t> counts(bins, 0);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    auto bin = static_cast<std::size_t>((data[i] - lo) / width);
    counts[std::min(bin, bins - 1)]++;
  }
  h.densities.resize(bins);
  const double total = static_cast<double>(data.size());
  for (std::size_t i = 0; i < bins; ++i) h.densities[i] = static_cast<double>(counts[i]) / (total * width);
  return h;
}

}  // namespace lowbit
