#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "lowbit/checkpoint.hpp"
#include "lowbit/errors.hpp"
#include "lowbit/quantizer.hpp"
#include "lowbit/rng.hpp"
#include "lowbit/tensor.hpp"

namespace lowbit {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled

  void validate() const;
};

struct SGDMConfig {
  double lr = 1e-2;
  double momentum = 0.9;

  void validate() const;
};

// Tensors with at most `threshold` elements keep full-precision states.
inline bool eligible_for_quantization(const Shape& shape, std::size_t threshold = 4096) {
  return numel(shape) > threshold;
}

// Storage policy for optimizer states.
struct StateCompression {
  std::optional<QuantizerSpec> first_moment;   // empty: full precision
  std::optional<QuantizerSpec> second_moment;  // empty: full precision
  // Keep >= 2-D second moments as row/column statistics; 1-D ones follow
  // `second_moment`.
  bool factorize_second_moment = false;
  std::size_t threshold = 4096;
  std::uint64_t seed = 0;  // keys stochastic-rounding streams

  // Everything in full precision.
  static StateCompression none() { return {}; }
  // First moment B128/DE (signed), second moment Rank-1/Linear (unsigned).
  static StateCompression adamw4(std::size_t threshold = 4096);
  // Same first moment, factorized second moments.
  static StateCompression adamw4_factor(std::size_t threshold = 4096);
  // Momentum B128/DE for SGDM.
  static StateCompression sgdm4(std::size_t threshold = 4096);
};

// Row and column statistics of a factorized second moment. A tensor of shape
// (d1, ..., dk) is viewed as a (d1*...*d(k-1)) x dk matrix.
template <typename Scalar>
struct FactoredPair {
  Shape shape;
  Array<Scalar> row;
  Array<Scalar> col;

  static FactoredPair zeros(const Shape& shape);
};

template <typename Scalar>
using StoredMoment = std::variant<std::monostate, Tensor<Scalar>, PackedTensor>;

template <typename Scalar>
using StoredSecondMoment = std::variant<std::monostate, Tensor<Scalar>, PackedTensor, FactoredPair<Scalar>>;

template <typename Scalar>
struct ParamState {
  StoredMoment<Scalar> m;
  StoredSecondMoment<Scalar> v;
  std::uint64_t step = 0;
};

// Precise states of one step next to what was stored for them.
template <typename Scalar>
struct StepTrace {
  Tensor<Scalar> m_exact, m_stored;
  std::optional<Tensor<Scalar>> v_exact, v_stored;
  bool m_compressed = false;
  bool v_compressed = false;
};

template <typename Scalar>
FactoredPair<Scalar> FactoredPair<Scalar>::zeros(const Shape& shape) {
  if (shape.size() < 2) throw ShapeError("factorization needs a tensor with at least two axes");
  const std::size_t cols = shape.back();
  const std::size_t rows = numel(shape) / std::max<std::size_t>(cols, 1);
  return {shape, Array<Scalar>::Zero(static_cast<Eigen::Index>(rows)),
          Array<Scalar>::Zero(static_cast<Eigen::Index>(cols))};
}

// R <- b2 R + (1-b2) rowsum(g^2), C <- b2 C + (1-b2) colsum(g^2).
template <typename Scalar>
void factored_update(FactoredPair<Scalar>& f, const Tensor<Scalar>& g, double beta2) {
  if (g.ndim() < 2) throw ShapeError("factored_update: gradient must have at least two axes");
  if (g.shape != f.shape) throw ShapeError("factored_update: gradient shape does not match statistics");
  const Eigen::Map<const RowMajorMatrix<Scalar>> g2d(g.values.data(), f.row.size(), f.col.size());
  const auto b2 = static_cast<Scalar>(beta2);
  const auto one_minus = static_cast<Scalar>(1.0 - beta2);
  const RowMajorMatrix<Scalar> sq = g2d.array().square().matrix();
  f.row = b2 * f.row + one_minus * sq.rowwise().sum().array();
  f.col = b2 * f.col + one_minus * sq.colwise().sum().transpose().array();
}

// v_ij = R_i C_j / sum(R); all zeros when sum(R) = 0.
template <typename Scalar>
Tensor<Scalar> factored_reconstruct(const FactoredPair<Scalar>& f) {
  Tensor<Scalar> v = Tensor<Scalar>::zeros(f.shape);
  const Scalar total = f.row.sum();
  if (!(total > Scalar(0))) return v;
  Eigen::Map<RowMajorMatrix<Scalar>> out(v.values.data(), f.row.size(), f.col.size());
  out.noalias() = (f.row.matrix() / total) * f.col.matrix().transpose();
  v.values = v.values.max(Scalar(0));
  return v;
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> load_moment(const StoredMoment<Scalar>& stored, const Shape& shape) {
  if (const auto* t = std::get_if<Tensor<Scalar>>(&stored)) return *t;
  if (const auto* p = std::get_if<PackedTensor>(&stored)) return dequantize<Scalar>(*p);
  return Tensor<Scalar>::zeros(shape);
}

template <typename Scalar>
StoredMoment<Scalar> store_moment(Tensor<Scalar> m, const std::optional<QuantizerSpec>& spec, bool eligible,
                                  CounterRng rng) {
  if (!spec || !eligible) return m;
  return quantize(m, *spec, &rng);
}

}  // namespace detail

// Compressed SGDM: decompress m, m <- beta m + g, theta <- theta - lr m,
// recompress m. Ineligible tensors keep m in full precision.
template <typename Scalar>
void sgdm_step(Tensor<Scalar>& theta, ParamState<Scalar>& state, const Tensor<Scalar>& g, const SGDMConfig& cfg,
               const StateCompression& compression, std::string_view name, StepTrace<Scalar>* trace = nullptr) {
  require_same_shape(theta, g, "sgdm_step");
  const bool eligible = eligible_for_quantization(theta.shape, compression.threshold);
  Tensor<Scalar> m = detail::load_moment(state.m, theta.shape);
  const auto beta = static_cast<Scalar>(cfg.momentum);
  const auto lr = static_cast<Scalar>(cfg.lr);
  m.values = beta * m.values + g.values;
  theta.values = theta.values - lr * m.values;
  ++state.step;
  const std::string key(name);
  if (trace) trace->m_exact = m;
  state.m = detail::store_moment(std::move(m), compression.first_moment, eligible,
                                 CounterRng(compression.seed, key + "/m", state.step));
  if (trace) {
    trace->m_stored = detail::load_moment(state.m, theta.shape);
    trace->m_compressed = std::holds_alternative<PackedTensor>(state.m);
  }
}

// Compressed AdamW. Raw moments are stored; bias correction is recomputed
// from the step counter each step. Weight decay is decoupled and uses the
// pre-step parameters.
template <typename Scalar>
void adamw_step(Tensor<Scalar>& theta, ParamState<Scalar>& state, const Tensor<Scalar>& g, const AdamWConfig& cfg,
                const StateCompression& compression, std::string_view name, StepTrace<Scalar>* trace = nullptr) {
  require_same_shape(theta, g, "adamw_step");
  const bool eligible = eligible_for_quantization(theta.shape, compression.threshold);
  const bool factored = compression.factorize_second_moment && theta.ndim() >= 2;
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const auto lr = static_cast<Scalar>(cfg.lr);
  const auto eps = static_cast<Scalar>(cfg.eps);
  const auto decay = static_cast<Scalar>(cfg.lr * cfg.weight_decay);

  Tensor<Scalar> m = detail::load_moment(state.m, theta.shape);
  m.values = b1 * m.values + (Scalar(1) - b1) * g.values;

  Tensor<Scalar> v;
  FactoredPair<Scalar> stats;
  if (factored) {
    if (auto* f = std::get_if<FactoredPair<Scalar>>(&state.v)) {
      stats = std::move(*f);
    } else {
      stats = FactoredPair<Scalar>::zeros(theta.shape);
    }
    factored_update(stats, g, cfg.beta2);
    v = factored_reconstruct(stats);
  } else {
    StoredMoment<Scalar> stored;
    if (auto* t = std::get_if<Tensor<Scalar>>(&state.v)) stored = std::move(*t);
    if (auto* p = std::get_if<PackedTensor>(&state.v)) stored = std::move(*p);
    v = detail::load_moment(stored, theta.shape);
    v.values = v.values.max(Scalar(0));
    v.values = b2 * v.values + (Scalar(1) - b2) * g.values.square();
  }

  const std::uint64_t t = state.step + 1;
  const auto bc1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const auto bc2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const Array<Scalar> m_hat = m.values / bc1;
  const Array<Scalar> v_hat = v.values / bc2;
  theta.values = theta.values - lr * m_hat / (v_hat.sqrt() + eps) - decay * theta.values;

  state.step = t;
  const std::string key(name);
  if (trace) {
    trace->m_exact = m;
    trace->v_exact = v;
  }
  state.m = detail::store_moment(std::move(m), compression.first_moment, eligible,
                                 CounterRng(compression.seed, key + "/m", t));
  if (factored) {
    state.v = std::move(stats);
  } else {
    auto stored = detail::store_moment(std::move(v), compression.second_moment, eligible,
                                       CounterRng(compression.seed, key + "/v", t));
    if (auto* tv = std::get_if<Tensor<Scalar>>(&stored)) state.v = std::move(*tv);
    if (auto* pv = std::get_if<PackedTensor>(&stored)) state.v = std::move(*pv);
  }
  if (trace) {
    trace->m_stored = detail::load_moment(state.m, theta.shape);
    trace->m_compressed = std::holds_alternative<PackedTensor>(state.m);
    trace->v_compressed = !std::holds_alternative<Tensor<Scalar>>(state.v);
    if (auto* f = std::get_if<FactoredPair<Scalar>>(&state.v)) {
      trace->v_stored = factored_reconstruct(*f);
    } else if (auto* tv = std::get_if<Tensor<Scalar>>(&state.v)) {
      trace->v_stored = *tv;
    } else if (auto* pv = std::get_if<PackedTensor>(&state.v)) {
      trace->v_stored = dequantize<Scalar>(*pv);
    }
  }
}

// Low-precision SGDM with microbatching. Optional quantizers for the
// gradient accumulator, the momentum and the parameters; an empty quantizer
// keeps that quantity exact.
struct LpmmConfig {
  SGDMConfig base;
  std::size_t accumulation_steps = 1;
  std::optional<QuantizerSpec> param;
  std::optional<QuantizerSpec> grad;
  std::optional<QuantizerSpec> momentum;

  void validate() const;
};

template <typename Scalar>
struct LpmmState {
  StoredMoment<Scalar> m;
  std::optional<PackedTensor> param;  // low-precision copy of theta
  std::uint64_t step = 0;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> fake_quantize(const Tensor<Scalar>& x, const std::optional<QuantizerSpec>& spec, CounterRng& rng,
                             std::optional<PackedTensor>* keep = nullptr) {
  if (!spec) return x;
  PackedTensor p = quantize(x, *spec, &rng);
  Tensor<Scalar> out = dequantize<Scalar>(p);
  if (keep) *keep = std::move(p);
  return out;
}

}  // namespace detail

// g_0 = 0; g_i = Q(g_{i-1} + grad_i) for the N microbatch gradients, all
// taken at theta_{t-1}; m = Q(beta m + g_N); theta = Q(theta - lr m).
template <typename Scalar>
void lpmm_sgdm_step(Tensor<Scalar>& theta, LpmmState<Scalar>& state, std::span<const Tensor<Scalar>> grads,
                    const LpmmConfig& cfg, CounterRng& rng) {
  if (grads.size() != cfg.accumulation_steps) {
    throw ConfigError("lpmm_sgdm_step: expected " + std::to_string(cfg.accumulation_steps) + " gradients, got " +
                      std::to_string(grads.size()));
  }
  Tensor<Scalar> acc = Tensor<Scalar>::zeros(theta.shape);
  for (const auto& g : grads) {
    require_same_shape(theta, g, "lpmm_sgdm_step");
    acc.values = acc.values + g.values;
    acc = detail::fake_quantize(acc, cfg.grad, rng);
  }
  Tensor<Scalar> m = detail::load_moment(state.m, theta.shape);
  m.values = static_cast<Scalar>(cfg.base.momentum) * m.values + acc.values;
  std::optional<PackedTensor> packed_m;
  m = detail::fake_quantize(m, cfg.momentum, rng, &packed_m);
  theta.values = theta.values - static_cast<Scalar>(cfg.base.lr) * m.values;
  theta = detail::fake_quantize(theta, cfg.param, rng, &state.param);
  if (packed_m) {
    state.m = std::move(*packed_m);
  } else {
    state.m = std::move(m);
  }
  ++state.step;
}

// Right-hand side of the convergence bound for compressed SGDM on a convex
// L-smooth objective:
//   (1/2T) (L beta/(1-beta) + (1-beta)/alpha) dist0^2
//     + alpha sigma^2/(1-beta) + alpha sigma_m^2/(1-beta)
// DomainError unless 0 < alpha <= (1-beta)/L.
double theorem1_bound(double L, double beta, double alpha, std::uint64_t T, double dist0, double sigma,
                      double sigma_m);

// E||Q(x)-x||^2 <= delta^2 d / 4 for stochastic rounding on a grid of step
// delta; returns the matching sigma_m = delta sqrt(d) / 2.
inline double uniform_quantizer_sigma(double delta, std::size_t d) {
  return delta * std::sqrt(static_cast<double>(d)) / 2.0;
}

template <typename Scalar>
std::size_t stored_bytes(const StoredMoment<Scalar>& s) {
  if (const auto* t = std::get_if<Tensor<Scalar>>(&s)) return 4 * static_cast<std::size_t>(t->size());
  if (const auto* p = std::get_if<PackedTensor>(&s)) return p->storage_bytes();
  return 0;
}

template <typename Scalar>
std::size_t stored_bytes(const StoredSecondMoment<Scalar>& s) {
  if (const auto* t = std::get_if<Tensor<Scalar>>(&s)) return 4 * static_cast<std::size_t>(t->size());
  if (const auto* p = std::get_if<PackedTensor>(&s)) return p->storage_bytes();
  if (const auto* f = std::get_if<FactoredPair<Scalar>>(&s)) {
    return 4 * static_cast<std::size_t>(f->row.size() + f->col.size());
  }
  return 0;
}

// Per-tensor optimizers over a named parameter list. States for one tensor
// are decompressed, updated and recompressed before the next tensor.
template <typename Scalar>
class AdamW {
 public:
  AdamW(AdamWConfig cfg, StateCompression compression) : cfg_(cfg), compression_(std::move(compression)) {
    cfg_.validate();
  }

  void step(ParamList<Scalar>& params, const ParamList<Scalar>& grads,
            std::vector<StepTrace<Scalar>>* traces = nullptr) {
    if (params.size() != grads.size()) throw ShapeError("AdamW: parameter and gradient counts differ");
    if (states_.empty()) states_.resize(params.size());
    if (traces) traces->assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      adamw_step(params[i].value, states_[i], grads[i].value, cfg_, compression_, params[i].name,
                 traces ? &(*traces)[i] : nullptr);
    }
  }

  AdamWConfig& config() { return cfg_; }
  const std::vector<ParamState<Scalar>>& states() const { return states_; }

  std::size_t state_bytes() const {
    std::size_t total = 0;
    for (const auto& s : states_) total += stored_bytes<Scalar>(s.m) + stored_bytes<Scalar>(s.v);
    return total;
  }

 private:
  AdamWConfig cfg_;
  StateCompression compression_;
  std::vector<ParamState<Scalar>> states_;
};

template <typename Scalar>
class Sgdm {
 public:
  Sgdm(SGDMConfig cfg, StateCompression compression) : cfg_(cfg), compression_(std::move(compression)) {
    cfg_.validate();
  }

  void step(ParamList<Scalar>& params, const ParamList<Scalar>& grads,
            std::vector<StepTrace<Scalar>>* traces = nullptr) {
    if (params.size() != grads.size()) throw ShapeError("Sgdm: parameter and gradient counts differ");
    if (states_.empty()) states_.resize(params.size());
    if (traces) traces->assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      sgdm_step(params[i].value, states_[i], grads[i].value, cfg_, compression_, params[i].name,
                traces ? &(*traces)[i] : nullptr);
    }
  }

  SGDMConfig& config() { return cfg_; }
  const std::vector<ParamState<Scalar>>& states() const { return states_; }

  std::size_t state_bytes() const {
    std::size_t total = 0;
    for (const auto& s : states_) total += stored_bytes<Scalar>(s.m);
    return total;
  }

 private:
  SGDMConfig cfg_;
  StateCompression compression_;
  std::vector<ParamState<Scalar>> states_;
};

// Checkpoint entries for optimizer states: "<name>.m", "<name>.v", or
// "<name>.v_row"/"<name>.v_col" for factorized second moments.
template <typename Scalar>
std::vector<CheckpointEntry> export_states(const ParamList<Scalar>& params,
                                           const std::vector<ParamState<Scalar>>& states) {
  std::vector<CheckpointEntry> out;
  auto push = [&](const std::string& name, const auto& stored) {
    using T = std::decay_t<decltype(stored)>;
    if constexpr (std::is_same_v<T, Tensor<Scalar>>) {
      out.push_back({name, stored.template cast<float>()});
    } else if constexpr (std::is_same_v<T, PackedTensor>) {
      out.push_back({name, stored});
    } else if constexpr (std::is_same_v<T, FactoredPair<Scalar>>) {
      out.push_back({name + "_row", TensorF({static_cast<std::size_t>(stored.row.size())},
                                             stored.row.template cast<float>())});
      out.push_back({name + "_col", TensorF({static_cast<std::size_t>(stored.col.size())},
                                             stored.col.template cast<float>())});
    }
  };
  for (std::size_t i = 0; i < states.size() && i < params.size(); ++i) {
    std::visit([&](const auto& s) { push(params[i].name + ".m", s); }, states[i].m);
    std::visit([&](const auto& s) { push(params[i].name + ".v", s); }, states[i].v);
  }
  return out;
}

}  // namespace lowbit
