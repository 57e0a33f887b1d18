#include "lowbit/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numbers>
#include <set>
#include <sstream>

#include "lowbit/errors.hpp"

namespace lowbit {

using nlohmann::json;

namespace {

// ------------------------------------------------------------------ helpers

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + " must be a JSON object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!names.count(key)) throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + context + ": " + e.what());
  }
}

void read_optional_string(const json& j, const char* key, std::optional<std::string>& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  out = j.at(key).get<std::string>();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

double global_norm(const ParamList<double>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.value.values.square().sum();
  return std::sqrt(sq);
}

void clip_gradients(ParamList<double>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    for (auto& g : grads) g.value.values *= max_norm / norm;
  }
}

double schedule_factor(const std::string& schedule, std::size_t step, std::size_t total) {
  const double progress = total ? static_cast<double>(step - 1) / static_cast<double>(total) : 0.0;
  if (schedule == "linear") return 1.0 - progress;
  if (schedule == "cosine") return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return 1.0;
}

std::optional<QuantizerSpec> resolve_spec(const std::optional<std::string>& text,
                                          const std::optional<QuantizerSpec>& fallback, bool is_signed) {
  if (!text) return fallback;
  if (*text == "none" || *text == "fp32") return std::nullopt;
  try {
    return parse_quantizer_spec(*text, is_signed);
  } catch (const RangeError& e) {
    throw ConfigError(e.what());
  }
}

bool is_adamw(const std::string& name) { return name == "adamw32" || name == "adamw4" || name == "adamw4-factor"; }
bool is_sgdm(const std::string& name) { return name == "sgdm32" || name == "sgdm4"; }

StateCompression resolve_compression(const OptimizerConfig& o, std::uint64_t seed) {
  StateCompression c;
  if (o.name == "adamw4") c = StateCompression::adamw4(o.threshold);
  if (o.name == "adamw4-factor") c = StateCompression::adamw4_factor(o.threshold);
  if (o.name == "sgdm4") c = StateCompression::sgdm4(o.threshold);
  c.threshold = o.threshold;
  c.first_moment = resolve_spec(o.first_moment, c.first_moment, true);
  c.second_moment = resolve_spec(o.second_moment, c.second_moment, false);
  if (o.second_moment && (*o.second_moment == "factor" || *o.second_moment == "factored")) {
    c.factorize_second_moment = true;
    c.second_moment = StateCompression::adamw4_factor().second_moment;
  }
  c.seed = seed;
  return c;
}

LpmmConfig resolve_lpmm(const OptimizerConfig& o) {
  LpmmConfig cfg;
  cfg.base = o.sgdm;
  cfg.accumulation_steps = o.accumulation_steps;
  cfg.param = resolve_spec(o.param_quantizer, parse_quantizer_spec("B2048/Uniform+SR@8", true), true);
  cfg.grad = resolve_spec(o.grad_quantizer, parse_quantizer_spec("B2048/Uniform+SR@8", true), true);
  cfg.momentum = resolve_spec(o.momentum_quantizer, parse_quantizer_spec("B2048/DE+SR@8", true), true);
  cfg.validate();
  return cfg;
}

std::string describe(const std::optional<QuantizerSpec>& spec) { return spec ? spec->name() : "fp32"; }

// ----------------------------------------------------------------- steppers

struct StepOutput {
  double grad_norm = 0.0;
  std::vector<StepTrace<double>> traces;
  std::optional<double> bin_change_ratio;
};

class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual StepOutput step(ParamList<double>& params, const Problem& problem, std::size_t t, double lr_factor,
                          bool trace) = 0;
  virtual std::size_t state_bytes() const = 0;
  virtual std::size_t fp32_state_bytes(const ParamList<double>& params) const = 0;
  virtual std::vector<CheckpointEntry> export_state(const ParamList<double>& params) const = 0;
};

std::size_t total_elements(const ParamList<double>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value.size());
  return n;
}

class AdamWStepper : public Stepper {
 public:
  AdamWStepper(const ExperimentConfig& cfg)
      : opt_(cfg.optimizer.adamw, resolve_compression(cfg.optimizer, cfg.seed)),
        base_lr_(cfg.optimizer.adamw.lr),
        clip_(cfg.optimizer.grad_clip),
        seed_(cfg.seed) {}

  StepOutput step(ParamList<double>& params, const Problem& problem, std::size_t t, double lr_factor,
                  bool trace) override {
    CounterRng data(seed_, "data", t);
    ParamList<double> grads = problem.stochastic_gradient(params, data);
    clip_gradients(grads, clip_);
    StepOutput out;
    out.grad_norm = global_norm(grads);
    opt_.config().lr = base_lr_ * lr_factor;
    opt_.step(params, grads, trace ? &out.traces : nullptr);
    return out;
  }
  std::size_t state_bytes() const override { return opt_.state_bytes(); }
  std::size_t fp32_state_bytes(const ParamList<double>& params) const override {
    return 2 * 4 * total_elements(params);
  }
  std::vector<CheckpointEntry> export_state(const ParamList<double>& params) const override {
    return export_states(params, opt_.states());
  }

 private:
  AdamW<double> opt_;
  double base_lr_;
  double clip_;
  std::uint64_t seed_;
};

class SgdmStepper : public Stepper {
 public:
  SgdmStepper(const ExperimentConfig& cfg)
      : opt_(cfg.optimizer.sgdm, resolve_compression(cfg.optimizer, cfg.seed)),
        base_lr_(cfg.optimizer.sgdm.lr),
        clip_(cfg.optimizer.grad_clip),
        seed_(cfg.seed) {}

  StepOutput step(ParamList<double>& params, const Problem& problem, std::size_t t, double lr_factor,
                  bool trace) override {
    CounterRng data(seed_, "data", t);
    ParamList<double> grads = problem.stochastic_gradient(params, data);
    clip_gradients(grads, clip_);
    StepOutput out;
    out.grad_norm = global_norm(grads);
    opt_.config().lr = base_lr_ * lr_factor;
    opt_.step(params, grads, trace ? &out.traces : nullptr);
    return out;
  }
  std::size_t state_bytes() const override { return opt_.state_bytes(); }
  std::size_t fp32_state_bytes(const ParamList<double>& params) const override { return 4 * total_elements(params); }
  std::vector<CheckpointEntry> export_state(const ParamList<double>& params) const override {
    return export_states(params, opt_.states());
  }

 private:
  Sgdm<double> opt_;
  double base_lr_;
  double clip_;
  std::uint64_t seed_;
};

class LpmmStepper : public Stepper {
 public:
  LpmmStepper(const ExperimentConfig& cfg)
      : cfg_(resolve_lpmm(cfg.optimizer)), base_lr_(cfg.optimizer.sgdm.lr), clip_(cfg.optimizer.grad_clip),
        seed_(cfg.seed) {}

  StepOutput step(ParamList<double>& params, const Problem& problem, std::size_t t, double lr_factor,
                  bool trace) override {
    if (states_.empty()) states_.resize(params.size());
    CounterRng data(seed_, "data", t);
    std::vector<ParamList<double>> micro;
    StepOutput out;
    for (std::size_t i = 0; i < cfg_.accumulation_steps; ++i) {
      micro.push_back(problem.stochastic_gradient(params, data));
      clip_gradients(micro.back(), clip_);
    }
    {
      ParamList<double> total = micro.front();
      for (std::size_t i = 1; i < micro.size(); ++i) {
        for (std::size_t k = 0; k < total.size(); ++k) total[k].value.values += micro[i][k].value.values;
      }
      out.grad_norm = global_norm(total);
    }
    LpmmConfig cfg = cfg_;
    cfg.base.lr = base_lr_ * lr_factor;
    double moved = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      std::vector<TensorD> grads;
      for (const auto& mb : micro) grads.push_back(mb[k].value);
      const TensorD before = params[k].value;
      CounterRng rng(seed_, "lpmm/" + params[k].name, t);
      lpmm_sgdm_step<double>(params[k].value, states_[k], grads, cfg, rng);
      if (states_[k].param) {
        const Eigen::ArrayXd step = expand_scales(states_[k].param->scales).cast<double>() *
                                    states_[k].param->spec.map.max_gap();
        const Eigen::ArrayXd diff = (params[k].value.values - before.values).abs();
        moved += (step > 0.0).select(diff / step, 0.0).sum();
        count += static_cast<std::size_t>(diff.size());
      }
      if (trace) {
        StepTrace<double> tr;
        tr.m_stored = detail::load_moment(states_[k].m, params[k].value.shape);
        tr.m_exact = tr.m_stored;
        tr.m_compressed = false;
        out.traces.push_back(std::move(tr));
      }
    }
    if (cfg_.param && count) out.bin_change_ratio = moved / static_cast<double>(count);
    return out;
  }
  std::size_t state_bytes() const override {
    std::size_t total = 0;
    for (const auto& s : states_) total += stored_bytes<double>(s.m);
    return total;
  }
  std::size_t fp32_state_bytes(const ParamList<double>& params) const override { return 4 * total_elements(params); }
  std::vector<CheckpointEntry> export_state(const ParamList<double>& params) const override {
    std::vector<CheckpointEntry> out;
    for (std::size_t k = 0; k < states_.size(); ++k) {
      if (const auto* t = std::get_if<TensorD>(&states_[k].m)) out.push_back({params[k].name + ".m", t->cast<float>()});
      if (const auto* p = std::get_if<PackedTensor>(&states_[k].m)) out.push_back({params[k].name + ".m", *p});
      if (states_[k].param) out.push_back({params[k].name + ".param", *states_[k].param});
    }
    return out;
  }

 private:
  LpmmConfig cfg_;
  double base_lr_;
  double clip_;
  std::uint64_t seed_;
  std::vector<LpmmState<double>> states_;
};

std::unique_ptr<Stepper> make_stepper(const ExperimentConfig& cfg) {
  if (is_adamw(cfg.optimizer.name)) return std::make_unique<AdamWStepper>(cfg);
  if (is_sgdm(cfg.optimizer.name)) return std::make_unique<SgdmStepper>(cfg);
  if (cfg.optimizer.name == "lpmm-sgdm") return std::make_unique<LpmmStepper>(cfg);
  throw ConfigError("unknown optimizer '" + cfg.optimizer.name + "'");
}

bool params_finite(const ParamList<double>& params) {
  return std::all_of(params.begin(), params.end(), [](const auto& p) { return p.value.values.isFinite().all(); });
}

std::optional<double> mean_defined(const std::vector<RunRecord>& records, const ErrorReport RunRecord::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (const auto& v = (r.*field).rel_l2) {
      sum += *v;
      ++n;
    }
  }
  if (!n) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

// ------------------------------------------------------------------ problems

std::unique_ptr<Problem> make_problem(const ProblemConfig& cfg) {
  if (cfg.name == "quadratic") {
    return std::make_unique<QuadraticProblem>(cfg.d, cfg.condition_number, cfg.seed, cfg.noise_sigma,
                                              cfg.init_distance);
  }
  if (cfg.name == "logreg") return std::make_unique<LogisticRegressionProblem>(cfg.n_samples, cfg.d, cfg.seed, cfg.batch_size);
  if (cfg.name == "mlp") {
    return std::make_unique<MlpProblem>(cfg.layers, cfg.n_samples, cfg.seed, cfg.batch_size, cfg.target_scale);
  }
  throw ConfigError("unknown problem '" + cfg.name + "'");
}

// -------------------------------------------------------------------- config

namespace {

ProblemConfig problem_from_json(const json& j) {
  check_keys(j, {"name", "d", "condition_number", "noise_sigma", "init_distance", "n_samples", "batch_size", "layers",
                 "target_scale", "seed"},
             "problem");
  ProblemConfig p;
  read(j, "name", p.name, "problem");
  read(j, "d", p.d, "problem");
  read(j, "condition_number", p.condition_number, "problem");
  read(j, "noise_sigma", p.noise_sigma, "problem");
  read(j, "init_distance", p.init_distance, "problem");
  read(j, "n_samples", p.n_samples, "problem");
  read(j, "batch_size", p.batch_size, "problem");
  read(j, "layers", p.layers, "problem");
  read(j, "target_scale", p.target_scale, "problem");
  read(j, "seed", p.seed, "problem");
  return p;
}

json problem_to_json(const ProblemConfig& p) {
  return {{"name", p.name},           {"d", p.d},
          {"condition_number", p.condition_number}, {"noise_sigma", p.noise_sigma},
          {"init_distance", p.init_distance}, {"n_samples", p.n_samples},
          {"batch_size", p.batch_size}, {"layers", p.layers},
          {"target_scale", p.target_scale}, {"seed", p.seed}};
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j, {"name", "problem", "optimizer", "steps", "seed", "log_interval", "output", "save_state", "timing",
                 "keep_snapshots"},
             "experiment");
  ExperimentConfig cfg;
  read(j, "name", cfg.name, "experiment");
  if (j.contains("problem")) cfg.problem = problem_from_json(j.at("problem"));
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, {"name", "lr", "beta1", "beta2", "eps", "weight_decay", "momentum", "first_moment",
                   "second_moment", "threshold", "accumulation_steps", "param_quantizer", "grad_quantizer",
                   "momentum_quantizer", "grad_clip", "lr_schedule"},
               "optimizer");
    OptimizerConfig& opt = cfg.optimizer;
    read(o, "name", opt.name, "optimizer");
    if (o.contains("lr")) {
      read(o, "lr", opt.adamw.lr, "optimizer");
      opt.sgdm.lr = opt.adamw.lr;
    }
    read(o, "beta1", opt.adamw.beta1, "optimizer");
    read(o, "beta2", opt.adamw.beta2, "optimizer");
    read(o, "eps", opt.adamw.eps, "optimizer");
    read(o, "weight_decay", opt.adamw.weight_decay, "optimizer");
    read(o, "momentum", opt.sgdm.momentum, "optimizer");
    read_optional_string(o, "first_moment", opt.first_moment);
    read_optional_string(o, "second_moment", opt.second_moment);
    read(o, "threshold", opt.threshold, "optimizer");
    read(o, "accumulation_steps", opt.accumulation_steps, "optimizer");
    read_optional_string(o, "param_quantizer", opt.param_quantizer);
    read_optional_string(o, "grad_quantizer", opt.grad_quantizer);
    read_optional_string(o, "momentum_quantizer", opt.momentum_quantizer);
    read(o, "grad_clip", opt.grad_clip, "optimizer");
    read(o, "lr_schedule", opt.lr_schedule, "optimizer");
  }
  read(j, "steps", cfg.steps, "experiment");
  read(j, "seed", cfg.seed, "experiment");
  read(j, "log_interval", cfg.log_interval, "experiment");
  read(j, "output", cfg.output, "experiment");
  read(j, "save_state", cfg.save_state, "experiment");
  read(j, "timing", cfg.timing, "experiment");
  read(j, "keep_snapshots", cfg.keep_snapshots, "experiment");
  validate(cfg);
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  const OptimizerConfig& o = cfg.optimizer;
  json opt = {{"name", o.name},
              {"lr", is_adamw(o.name) ? o.adamw.lr : o.sgdm.lr},
              {"beta1", o.adamw.beta1},
              {"beta2", o.adamw.beta2},
              {"eps", o.adamw.eps},
              {"weight_decay", o.adamw.weight_decay},
              {"momentum", o.sgdm.momentum},
              {"threshold", o.threshold},
              {"accumulation_steps", o.accumulation_steps},
              {"grad_clip", o.grad_clip},
              {"lr_schedule", o.lr_schedule}};
  if (o.first_moment) opt["first_moment"] = *o.first_moment;
  if (o.second_moment) opt["second_moment"] = *o.second_moment;
  if (o.param_quantizer) opt["param_quantizer"] = *o.param_quantizer;
  if (o.grad_quantizer) opt["grad_quantizer"] = *o.grad_quantizer;
  if (o.momentum_quantizer) opt["momentum_quantizer"] = *o.momentum_quantizer;
  return {{"name", cfg.name},
          {"problem", problem_to_json(cfg.problem)},
          {"optimizer", opt},
          {"steps", cfg.steps},
          {"seed", cfg.seed},
          {"log_interval", cfg.log_interval},
          {"output", cfg.output},
          {"save_state", cfg.save_state},
          {"timing", cfg.timing},
          {"keep_snapshots", cfg.keep_snapshots}};
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("empty path component in override '" + assignment + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (!node->is_object()) *node = json::object();
    start = dot + 1;
  }
}

void validate(const ExperimentConfig& cfg) {
  const ProblemConfig& p = cfg.problem;
  if (p.name != "quadratic" && p.name != "logreg" && p.name != "mlp") throw ConfigError("unknown problem '" + p.name + "'");
  const OptimizerConfig& o = cfg.optimizer;
  if (!is_adamw(o.name) && !is_sgdm(o.name) && o.name != "lpmm-sgdm") {
    throw ConfigError("unknown optimizer '" + o.name + "'");
  }
  if (o.lr_schedule != "constant" && o.lr_schedule != "linear" && o.lr_schedule != "cosine") {
    throw ConfigError("unknown lr schedule '" + o.lr_schedule + "'");
  }
  if (o.grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
  if (cfg.steps < 1) throw ConfigError("steps must be at least 1");
  if (cfg.log_interval < 1) throw ConfigError("log_interval must be at least 1");
  if (is_adamw(o.name)) {
    o.adamw.validate();
    resolve_compression(o, cfg.seed);
  } else if (is_sgdm(o.name)) {
    o.sgdm.validate();
    resolve_compression(o, cfg.seed);
  } else {
    resolve_lpmm(o);
  }
}

// ----------------------------------------------------------------------- run

RunResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto problem = make_problem(cfg.problem);
  auto stepper = make_stepper(cfg);
  RunResult result;
  ParamList<double> params = problem->initial_params();
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const bool logged = t % cfg.log_interval == 0 || t == cfg.steps;
    StepOutput out;
    bool diverged = false;
    try {
      out = stepper->step(params, *problem, t, schedule_factor(cfg.optimizer.lr_schedule, t, cfg.steps), logged);
      diverged = !params_finite(params);
    } catch (const DomainError&) {
      diverged = true;
    }
    result.summary.steps_completed = t;
    if (!diverged && !logged) continue;

    RunRecord rec;
    rec.step = t;
    rec.loss = diverged ? std::numeric_limits<double>::quiet_NaN() : problem->loss(params);
    rec.grad_norm = out.grad_norm;
    rec.bin_change_ratio = out.bin_change_ratio;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ErrorAccumulator m_acc, v_acc, inv_acc;
    std::size_t v_zeros = 0, v_count = 0;
    for (std::size_t k = 0; k < out.traces.size(); ++k) {
      const auto& tr = out.traces[k];
      if (tr.m_compressed) m_acc.add(tr.m_exact.values, tr.m_stored.values);
      if (tr.v_compressed && tr.v_exact && tr.v_stored) {
        v_acc.add(tr.v_exact->values, tr.v_stored->values);
        inv_acc.add(inv_sqrt_transform(tr.v_exact->values, 1e-6), inv_sqrt_transform(tr.v_stored->values, 1e-6));
        v_zeros += static_cast<std::size_t>((tr.v_stored->values == 0.0).count());
        v_count += static_cast<std::size_t>(tr.v_stored->size());
      }
      if (cfg.keep_snapshots) {
        result.snapshots.push_back({t, params[k].name, tr.m_exact, tr.v_exact});
      }
    }
    rec.m_error = m_acc.report();
    rec.v_error = v_acc.report();
    rec.v_inv_sqrt_error = inv_acc.report();
    rec.v_inv_sqrt_error.zero_fraction = v_count ? static_cast<double>(v_zeros) / static_cast<double>(v_count) : 0.0;
    if (!std::isfinite(rec.loss)) diverged = true;
    result.records.push_back(rec);
    if (diverged) {
      result.summary.status = "diverged";
      break;
    }
  }

  RunSummary& s = result.summary;
  s.final_loss = result.records.empty() ? problem->loss(params) : result.records.back().loss;
  s.mean_m_rel_l2 = mean_defined(result.records, &RunRecord::m_error);
  s.mean_v_rel_l2 = mean_defined(result.records, &RunRecord::v_error);
  s.mean_v_inv_sqrt_rel_l2 = mean_defined(result.records, &RunRecord::v_inv_sqrt_error);
  if (!result.records.empty()) s.final_v_zero_fraction = result.records.back().v_inv_sqrt_error.zero_fraction;
  s.state_bytes = stepper->state_bytes();
  s.fp32_state_bytes = stepper->fp32_state_bytes(params);
  s.compression_ratio =
      s.fp32_state_bytes ? static_cast<double>(s.state_bytes) / static_cast<double>(s.fp32_state_bytes) : 1.0;
  result.final_state = stepper->export_state(params);
  result.final_params = std::move(params);
  return result;
}

std::string records_csv(const std::vector<RunRecord>& records, bool timing) {
  std::ostringstream out;
  out << "step,loss,grad_norm,m_rel_l2,m_max_abs,m_zero_fraction,v_rel_l2,v_max_abs,v_zero_fraction,"
         "v_inv_sqrt_rel_l2,bin_change_ratio";
  if (timing) out << ",wall_time";
  out << '\n';
  for (const auto& r : records) {
    out << r.step << ',' << fmt(r.loss) << ',' << fmt(r.grad_norm) << ',' << fmt(r.m_error.rel_l2) << ','
        << fmt(r.m_error.max_abs) << ',' << fmt(r.m_error.zero_fraction) << ',' << fmt(r.v_error.rel_l2) << ','
        << fmt(r.v_error.max_abs) << ',' << fmt(r.v_inv_sqrt_error.zero_fraction) << ','
        << fmt(r.v_inv_sqrt_error.rel_l2) << ',' << fmt(r.bin_change_ratio);
    if (timing) out << ',' << fmt(r.wall_time);
    out << '\n';
  }
  return out.str();
}

json summary_json(const RunSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"status", s.status},
          {"steps_completed", s.steps_completed},
          {"final_loss", std::isfinite(s.final_loss) ? json(s.final_loss) : json(nullptr)},
          {"mean_m_rel_l2", opt(s.mean_m_rel_l2)},
          {"mean_v_rel_l2", opt(s.mean_v_rel_l2)},
          {"mean_v_inv_sqrt_rel_l2", opt(s.mean_v_inv_sqrt_rel_l2)},
          {"final_v_zero_fraction", s.final_v_zero_fraction},
          {"state_bytes", s.state_bytes},
          {"fp32_state_bytes", s.fp32_state_bytes},
          {"compression_ratio", s.compression_ratio}};
}

// --------------------------------------------------------------------- sweep

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void append_file_items(const std::filesystem::path& path, std::vector<SweepItem>& items) {
  const std::string stem = path.stem().string();
  json j;
  try {
    j = read_json_file(path);
  } catch (const ConfigError& e) {
    items.push_back({stem, std::string(e.what())});
    return;
  }
  if (j.is_object() && j.contains("variants")) {
    const json base = j.value("base", json::object());
    const json& variants = j.at("variants");
    if (!variants.is_array()) {
      items.push_back({stem, std::string("'variants' must be an array")});
      return;
    }
    for (std::size_t i = 0; i < variants.size(); ++i) {
      json merged = base;
      std::string label = stem + "#" + std::to_string(i);
      json patch = variants[i];
      if (patch.is_object() && patch.contains("name") && patch["name"].is_string()) label = patch["name"];
      try {
        merged.merge_patch(patch);
        ExperimentConfig cfg = experiment_from_json(merged);
        if (cfg.name.empty()) cfg.name = label;
        items.push_back({label, std::move(cfg)});
      } catch (const std::exception& e) {
        items.push_back({label, std::string(e.what())});
      }
    }
    return;
  }
  try {
    ExperimentConfig cfg = experiment_from_json(j);
    if (cfg.name.empty()) cfg.name = stem;
    items.push_back({stem, std::move(cfg)});
  } catch (const std::exception& e) {
    items.push_back({stem, std::string(e.what())});
  }
}

}  // namespace

std::vector<SweepItem> load_sweep(const std::string& spec) {
  std::vector<SweepItem> items;
  namespace fs = std::filesystem;
  if (fs::is_directory(spec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(spec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) append_file_items(f, items);
  } else {
    std::stringstream list(spec);
    std::string part;
    while (std::getline(list, part, ',')) {
      if (!part.empty()) append_file_items(part, items);
    }
  }
  if (items.empty()) throw ConfigError("sweep '" + spec + "' contains no configs");
  return items;
}

std::vector<SweepRow> sweep(const std::vector<SweepItem>& items, unsigned jobs) {
  if (items.empty()) throw ConfigError("sweep needs at least one config");
  std::vector<SweepRow> rows(items.size());
  auto run_one = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.label = items[i].label;
    if (const auto* err = std::get_if<std::string>(&items[i].config)) {
      row.error = *err;
      return;
    }
    row.config = std::get<ExperimentConfig>(items[i].config);
    try {
      row.summary = run_experiment(*row.config).summary;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };
  jobs = std::max(1u, jobs);
  for (std::size_t begin = 0; begin < items.size(); begin += jobs) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = begin; i < std::min(items.size(), begin + jobs); ++i) {
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, run_one, i));
    }
    for (auto& f : batch) f.get();
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "label,problem,optimizer,first_moment,second_moment,steps,seed,status,final_loss,m_rel_l2,v_rel_l2,"
         "v_inv_sqrt_rel_l2,v_zero_fraction,state_bytes,fp32_state_bytes,compression_ratio,error\n";
  auto csv_text = [](std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
      if (c == '"') quoted += '"';
      quoted += c == '\n' ? ' ' : c;
    }
    return quoted + "\"";
  };
  for (const auto& r : rows) {
    out << csv_text(r.label) << ',';
    if (r.config) {
      const auto& c = *r.config;
      std::string first = "-", second = "-";
      if (c.optimizer.name != "lpmm-sgdm") {
        const StateCompression comp = resolve_compression(c.optimizer, c.seed);
        first = describe(comp.first_moment);
        second = is_adamw(c.optimizer.name) ? (comp.factorize_second_moment ? "factored+" + describe(comp.second_moment)
                                                                            : describe(comp.second_moment))
                                            : "-";
      } else {
        first = describe(resolve_lpmm(c.optimizer).momentum);
      }
      out << c.problem.name << ',' << c.optimizer.name << ',' << csv_text(first) << ',' << csv_text(second) << ','
          << c.steps << ',' << c.seed << ',';
    } else {
      out << ",,,,,,";
    }
    if (r.summary) {
      const auto& s = *r.summary;
      out << s.status << ',' << fmt(s.final_loss) << ',' << fmt(s.mean_m_rel_l2) << ',' << fmt(s.mean_v_rel_l2) << ','
          << fmt(s.mean_v_inv_sqrt_rel_l2) << ',' << fmt(s.final_v_zero_fraction) << ',' << s.state_bytes << ','
          << s.fp32_state_bytes << ',' << fmt(s.compression_ratio) << ',';
    } else {
      out << "error,,,,,,,,,";
    }
    out << csv_text(r.error) << '\n';
  }
  return out.str();
}

// --------------------------------------------------------------- bound check

BoundCheckConfig bound_check_from_json(const json& j) {
  check_keys(j, {"name", "problem", "optimizer", "steps", "runs", "seed"}, "bound-check config");
  BoundCheckConfig cfg;
  cfg.sgdm.lr = 0.0;
  if (j.contains("problem")) cfg.problem = problem_from_json(j.at("problem"));
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, {"name", "lr", "momentum", "momentum_step", "momentum_bits", "rounding"}, "optimizer");
    std::string name = "sgdm";
    read(o, "name", name, "optimizer");
    if (name != "sgdm" && name != "sgdm32" && name != "compressed-sgdm") {
      throw ConfigError("bound-check needs an SGDM optimizer, got '" + name + "'");
    }
    read(o, "lr", cfg.sgdm.lr, "optimizer");
    read(o, "momentum", cfg.sgdm.momentum, "optimizer");
    read(o, "momentum_step", cfg.momentum_step, "optimizer");
    read(o, "momentum_bits", cfg.momentum_bits, "optimizer");
    std::string rounding = "stochastic";
    read(o, "rounding", rounding, "optimizer");
    if (rounding == "stochastic") {
      cfg.rounding = Rounding::Stochastic;
    } else if (rounding == "nearest") {
      cfg.rounding = Rounding::Nearest;
    } else {
      throw ConfigError("unknown rounding '" + rounding + "'");
    }
  }
  read(j, "steps", cfg.steps, "bound-check config");
  read(j, "runs", cfg.runs, "bound-check config");
  read(j, "seed", cfg.seed, "bound-check config");
  return cfg;
}

BoundCheckResult bound_check(const BoundCheckConfig& cfg) {
  if (cfg.problem.name != "quadratic") throw ConfigError("bound-check runs on the quadratic problem only");
  if (cfg.runs < 1 || cfg.steps < 1) throw ConfigError("bound-check needs at least one run and one step");
  if (cfg.momentum_step < 0.0) throw ConfigError("momentum_step must be non-negative");
  if (cfg.momentum_step > 0.0 && (cfg.momentum_bits < 2 || cfg.momentum_bits > 8)) {
    throw ConfigError("momentum_bits must be in [2, 8]");
  }
  const QuadraticProblem problem(cfg.problem.d, cfg.problem.condition_number, cfg.problem.seed,
                                 cfg.problem.noise_sigma, cfg.problem.init_distance);
  const double L = *problem.smoothness();
  SGDMConfig sgdm = cfg.sgdm;
  if (!(sgdm.momentum >= 0.0 && sgdm.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (sgdm.lr <= 0.0) sgdm.lr = (1.0 - sgdm.momentum) / L;

  BoundCheckResult result;
  result.lr = sgdm.lr;
  StateCompression compression = StateCompression::none();
  compression.threshold = 0;
  float range = 0.0f;
  if (cfg.momentum_step > 0.0) {
    const int half = (1 << (cfg.momentum_bits - 1)) - 1;
    range = static_cast<float>(cfg.momentum_step * half);
    const double delta = static_cast<double>(range) / half;
    compression.first_moment = QuantizerSpec{NormScheme::fixed(range), QuantMap::uniform(cfg.momentum_bits), cfg.rounding};
    result.sigma_m = uniform_quantizer_sigma(delta, problem.dim());
  }
  const ParamList<double> start = problem.initial_params();
  const double dist0 = ((start[0].value.values - problem.optimum()->at(0).value.values).matrix()).norm();
  try {
    result.bound = theorem1_bound(L, sgdm.momentum, sgdm.lr, cfg.steps, dist0, problem.noise_sigma(), result.sigma_m);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }

  for (std::size_t run = 0; run < cfg.runs; ++run) {
    TensorD theta = start[0].value;
    ParamState<double> state;
    compression.seed = mix64(cfg.seed ^ mix64(run + 1));
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(theta.size());
    StepTrace<double> trace;
    for (std::size_t t = 1; t <= cfg.steps; ++t) {
      sum += theta.values;
      CounterRng noise(cfg.seed, "bound-check/" + std::to_string(run), t);
      const ParamList<double> g = problem.stochastic_gradient({{"theta", theta}}, noise);
      sgdm_step(theta, state, g[0].value, sgdm, compression, "theta", &trace);
      if (range > 0.0f) {
        result.clipped += static_cast<std::size_t>((trace.m_exact.values.abs() > static_cast<double>(range)).count());
      }
    }
    const Eigen::ArrayXd mean_iterate = sum / static_cast<double>(cfg.steps);
    const double gap = problem.loss_at(mean_iterate) - *problem.optimal_loss();
    result.suboptimality.push_back(gap);
    if (gap <= result.bound) ++result.within;
  }
  double total = 0.0;
  for (double g : result.suboptimality) total += g;
  result.mean_suboptimality = total / static_cast<double>(cfg.runs);
  result.fraction_within = static_cast<double>(result.within) / static_cast<double>(cfg.runs);
  result.passed = result.fraction_within >= 0.95;
  return result;
}

json bound_check_json(const BoundCheckResult& r) {
  return {{"bound", r.bound},
          {"lr", r.lr},
          {"sigma_m", r.sigma_m},
          {"runs", r.suboptimality.size()},
          {"mean_suboptimality", r.mean_suboptimality},
          {"within", r.within},
          {"fraction_within", r.fraction_within},
          {"margin", r.bound - r.mean_suboptimality},
          {"clipped", r.clipped},
          {"passed", r.passed}};
}

// ------------------------------------------------------------------- analyze

std::vector<AnalyzeRow> analyze_checkpoint(const std::vector<CheckpointEntry>& entries,
                                           const std::vector<std::string>& schemes, std::uint64_t seed) {
  std::vector<AnalyzeRow> rows;
  for (const auto& entry : entries) {
    TensorD x = std::visit(
        [](const auto& v) -> TensorD {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, TensorF>) {
            return v.template cast<double>();
          } else {
            return dequantize<double>(v);
          }
        },
        entry.value);
    if (x.size() == 0) continue;
    const bool is_signed = (x.values < 0.0).any();
    for (const auto& scheme : schemes) {
      QuantizerSpec spec;
      try {
        spec = parse_quantizer_spec(scheme, is_signed);
      } catch (const RangeError& e) {
        throw ConfigError(e.what());
      }
      CounterRng rng(seed, entry.name + "|" + scheme, 0);
      const TensorD approx = dequantize<double>(quantize(x, spec, &rng));
      rows.push_back({entry.name, spec.name(), spec.map.name(), spec.map.bitwidth(), relative_error(x, approx)});
    }
  }
  return rows;
}

std::string analyze_csv(const std::vector<AnalyzeRow>& rows) {
  std::ostringstream out;
  out << "tensor_name,scheme,map,bits,rel_l2,max_abs,zero_fraction\n";
  for (const auto& r : rows) {
    out << r.tensor_name << ',' << r.scheme << ',' << r.map << ',' << r.bits << ',' << fmt(r.error.rel_l2) << ','
        << fmt(r.error.max_abs) << ',' << fmt(r.error.zero_fraction) << '\n';
  }
  return out.str();
}

}  // namespace lowbit
