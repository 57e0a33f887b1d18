#include "lowbit/optim.hpp"

namespace lowbit {

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("AdamW learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("AdamW weight decay must be non-negative");
}

void SGDMConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("SGDM learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("SGDM momentum must lie in [0, 1)");
}

void LpmmConfig::validate() const {
  base.validate();
  if (accumulation_steps < 1) throw ConfigError("LPMM accumulation steps must be at least 1");
}

StateCompression StateCompression::adamw4(std::size_t threshold) {
  StateCompression c;
  c.first_moment = parse_quantizer_spec("B128/DE", true);
  c.second_moment = parse_quantizer_spec("Rank-1/Linear", false);
  c.threshold = threshold;
  return c;
}

StateCompression StateCompression::adamw4_factor(std::size_t threshold) {
  StateCompression c = adamw4(threshold);
  c.factorize_second_moment = true;
  return c;
}

StateCompression StateCompression::sgdm4(std::size_t threshold) {
  StateCompression c;
  c.first_moment = parse_quantizer_spec("B128/DE", true);
  c.threshold = threshold;
  return c;
}

double theorem1_bound(double L, double beta, double alpha, std::uint64_t T, double dist0, double sigma,
                      double sigma_m) {
  if (!(L > 0.0)) throw DomainError("theorem1_bound: L must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("theorem1_bound: beta must lie in [0, 1)");
  if (T == 0) throw DomainError("theorem1_bound: T must be positive");
  const double alpha_max = (1.0 - beta) / L;
  // Tolerate the last-bit rounding of alpha = (1-beta)/L computed elsewhere.
  if (!(alpha > 0.0) || alpha > alpha_max * (1.0 + 4 * std::numeric_limits<double>::epsilon())) {
    throw DomainError("theorem1_bound: alpha must lie in (0, (1-beta)/L]");
  }
  const double one_minus = 1.0 - beta;
  const double initial = (L * beta / one_minus + one_minus / alpha) * dist0 * dist0 / (2.0 * static_cast<double>(T));
  return initial + alpha * sigma * sigma / one_minus + alpha * sigma_m * sigma_m / one_minus;
}

}  // namespace lowbit
