#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lowbit/checkpoint.hpp"
#include "lowbit/diagnostics.hpp"
#include "lowbit/optim.hpp"
#include "lowbit/problems.hpp"

namespace lowbit {

struct ProblemConfig {
  std::string name = "quadratic";  // quadratic | logreg | mlp
  std::size_t d = 10;
  double condition_number = 10.0;
  double noise_sigma = 0.0;
  double init_distance = 1.0;
  std::size_t n_samples = 1000;
  std::size_t batch_size = 32;
  std::vector<std::size_t> layers{8, 64, 80, 1};
  double target_scale = 1.0;
  std::uint64_t seed = 0;
};

std::unique_ptr<Problem> make_problem(const ProblemConfig& cfg);

struct OptimizerConfig {
  // adamw32 | adamw4 | adamw4-factor | sgdm32 | sgdm4 | lpmm-sgdm
  std::string name = "adamw32";
  AdamWConfig adamw;
  SGDMConfig sgdm;
  // Scheme overrides ("B128/DE", "Rank-1/Linear", "none", ...).
  std::optional<std::string> first_moment;
  std::optional<std::string> second_moment;
  std::size_t threshold = 4096;
  // lpmm-sgdm
  std::size_t accumulation_steps = 1;
  std::optional<std::string> param_quantizer;
  std::optional<std::string> grad_quantizer;
  std::optional<std::string> momentum_quantizer;
  // Harness-level wrappers around the step functions.
  double grad_clip = 0.0;                  // global-norm clip, 0 = off
  std::string lr_schedule = "constant";    // constant | linear | cosine
};

struct ExperimentConfig {
  std::string name;
  ProblemConfig problem;
  OptimizerConfig optimizer;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  std::size_t log_interval = 10;
  std::string output;      // CSV path, empty = none
  std::string save_state;  // checkpoint path for final optimizer states
  bool timing = false;     // add wall_time column (breaks byte-level determinism)
  bool keep_snapshots = false;
};

// JSON <-> config. Unknown keys and unresolvable names raise ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Applies "dotted.key=value" overrides to a JSON config; values parse as
// JSON when possible and as strings otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Resolves every name in the config; throws ConfigError before any work.
void validate(const ExperimentConfig& cfg);

struct RunRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  ErrorReport m_error;
  ErrorReport v_error;
  ErrorReport v_inv_sqrt_error;
  std::optional<double> bin_change_ratio;
  double wall_time = 0.0;
};

struct RunSummary {
  std::string status = "ok";  // ok | diverged
  std::size_t steps_completed = 0;
  double final_loss = 0.0;
  std::optional<double> mean_m_rel_l2;
  std::optional<double> mean_v_rel_l2;
  std::optional<double> mean_v_inv_sqrt_rel_l2;
  double final_v_zero_fraction = 0.0;
  std::size_t state_bytes = 0;
  std::size_t fp32_state_bytes = 0;
  double compression_ratio = 1.0;
};

struct StateSnapshot {
  std::size_t step;
  std::string name;
  TensorD m;
  std::optional<TensorD> v;
};

struct RunResult {
  std::vector<RunRecord> records;
  RunSummary summary;
  ParamList<double> final_params;
  std::vector<CheckpointEntry> final_state;
  std::vector<StateSnapshot> snapshots;  // exact states at logged steps, when requested
};

// Runs the optimizer loop. Deterministic given the config. A non-finite loss
// stops the run with summary.status = "diverged".
RunResult run_experiment(const ExperimentConfig& cfg);

std::string records_csv(const std::vector<RunRecord>& records, bool timing = false);
nlohmann::json summary_json(const RunSummary& summary);

// One sweep member: a parsed config or the error that prevented parsing.
struct SweepItem {
  std::string label;
  std::variant<ExperimentConfig, std::string> config;
};

struct SweepRow {
  std::string label;
  std::optional<ExperimentConfig> config;
  std::optional<RunSummary> summary;
  std::string error;
};

// Expands a directory (sorted *.json), a comma-separated list of files, or
// a file holding {"base": {...}, "variants": [{"name": ..., <overrides>}...]}.
std::vector<SweepItem> load_sweep(const std::string& spec);

// Runs members on up to `jobs` threads; rows keep the input order.
std::vector<SweepRow> sweep(const std::vector<SweepItem>& items, unsigned jobs = 1);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct BoundCheckConfig {
  ProblemConfig problem;      // must be a quadratic
  SGDMConfig sgdm;            // lr <= 0 selects (1 - beta) / L
  std::size_t steps = 200;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  // Fixed-step momentum quantizer delta*SR(clip(x/delta, -B, B)); step 0 = exact momentum.
  double momentum_step = 0.0;
  int momentum_bits = 8;
  Rounding rounding = Rounding::Stochastic;
};

struct BoundCheckResult {
  double bound = 0.0;
  double lr = 0.0;
  double sigma_m = 0.0;
  std::vector<double> suboptimality;  // f(mean iterate) - f* per run
  double mean_suboptimality = 0.0;
  std::size_t within = 0;
  double fraction_within = 0.0;
  std::size_t clipped = 0;  // momentum entries outside the quantizer range
  bool passed = false;      // fraction_within >= 0.95
};

BoundCheckConfig bound_check_from_json(const nlohmann::json& j);
BoundCheckResult bound_check(const BoundCheckConfig& cfg);
nlohmann::json bound_check_json(const BoundCheckResult& result);

// Diagnostics of every checkpoint tensor re-quantized with each scheme.
struct AnalyzeRow {
  std::string tensor_name;
  std::string scheme;
  std::string map;
  int bits = 0;
  ErrorReport error;
};

std::vector<AnalyzeRow> analyze_checkpoint(const std::vector<CheckpointEntry>& entries,
                                           const std::vector<std::string>& schemes, std::uint64_t seed = 0);
std::string analyze_csv(const std::vector<AnalyzeRow>& rows);

}  // namespace lowbit
