// Command-line front-end for the lowbit experiment harness.
//
// Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lowbit/checkpoint.hpp"
#include "lowbit/errors.hpp"
#include "lowbit/harness.hpp"

namespace {

using nlohmann::json;

constexpr int kConfigError = 1;
constexpr int kNumericalFailure = 2;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lowbit::ConfigError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw lowbit::ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lowbit::ConfigError("cannot write " + path);
  out << text;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, sep)) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  bool timing = false;
  std::string summary;
};

int cmd_run(const RunArgs& args) {
  json j = read_json(args.config);
  for (const auto& o : args.overrides) lowbit::apply_override(j, o);
  if (args.seed) j["seed"] = *args.seed;
  lowbit::ExperimentConfig cfg = lowbit::experiment_from_json(j);
  if (args.timing) cfg.timing = true;
  if (!args.out.empty()) cfg.output = args.out;

  const lowbit::RunResult result = lowbit::run_experiment(cfg);
  write_text(cfg.output.empty() ? "-" : cfg.output, lowbit::records_csv(result.records, cfg.timing));
  if (!cfg.save_state.empty()) lowbit::save_checkpoint(result.final_state, cfg.save_state);
  const std::string summary = lowbit::summary_json(result.summary).dump(2) + "\n";
  if (!args.summary.empty()) {
    write_text(args.summary, summary);
  } else {
    std::cerr << summary;
  }
  if (result.summary.status != "ok") {
    std::cerr << "run diverged at step " << result.summary.steps_completed << '\n';
    return kNumericalFailure;
  }
  return 0;
}

int cmd_sweep(const std::string& configs, const std::string& out, unsigned jobs) {
  const auto items = lowbit::load_sweep(configs);
  const auto rows = lowbit::sweep(items, jobs);
  write_text(out, lowbit::sweep_csv(rows));
  int code = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      std::cerr << r.label << ": " << r.error << '\n';
      code = kConfigError;
    } else if (r.summary && r.summary->status != "ok" && code == 0) {
      code = kNumericalFailure;
    }
  }
  return code;
}

int cmd_bound_check(const std::string& config, std::optional<std::size_t> runs, std::optional<std::uint64_t> seed,
                    const std::string& out) {
  lowbit::BoundCheckConfig cfg = lowbit::bound_check_from_json(read_json(config));
  if (runs) cfg.runs = *runs;
  if (seed) cfg.seed = *seed;
  const auto result = lowbit::bound_check(cfg);
  write_text(out, lowbit::bound_check_json(result).dump(2) + "\n");
  return result.passed ? 0 : kNumericalFailure;
}

int cmd_analyze(const std::string& input, const std::string& schemes, std::uint64_t seed, const std::string& out) {
  const auto entries = lowbit::load_checkpoint(input);
  const auto list = split(schemes, ',');
  if (list.empty()) throw lowbit::ConfigError("--schemes needs at least one scheme");
  write_text(out, lowbit::analyze_csv(lowbit::analyze_checkpoint(entries, list, seed)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-bit optimizer state compression experiments"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its CSV log");
  run_cmd->add_option("--config", run.config, "Experiment JSON")->required();
  run_cmd->add_option("--seed", run.seed, "Override the experiment seed");
  run_cmd->add_option("--out", run.out, "CSV output path (default: stdout)");
  run_cmd->add_option("--set", run.overrides, "Override a config key, e.g. optimizer.lr=0.01");
  run_cmd->add_option("--summary", run.summary, "Write the JSON summary here instead of stderr");
  run_cmd->add_flag("--timing", run.timing, "Add a wall_time column");

  std::string sweep_configs, sweep_out;
  unsigned jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a set of experiments and write one summary row each");
  sweep_cmd->add_option("--configs", sweep_configs, "Directory of JSON configs or comma-separated list")->required();
  sweep_cmd->add_option("--out", sweep_out, "CSV output path (default: stdout)");
  sweep_cmd->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  std::string bound_config, bound_out;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> bound_seed;
  auto* bound_cmd = app.add_subcommand("bound-check", "Compare averaged-iterate suboptimality with the SGDM bound");
  bound_cmd->add_option("--config", bound_config, "Bound-check JSON")->required();
  bound_cmd->add_option("--runs", runs, "Number of seeded replications");
  bound_cmd->add_option("--seed", bound_seed, "Base seed");
  bound_cmd->add_option("--out", bound_out, "JSON output path (default: stdout)");

  std::string input, schemes, analyze_out;
  std::uint64_t analyze_seed = 0;
  auto* analyze_cmd = app.add_subcommand("quantize-analyze", "Re-quantize checkpoint tensors and report errors");
  analyze_cmd->add_option("--input", input, "Checkpoint file")->required();
  analyze_cmd->add_option("--schemes", schemes, "Comma-separated quantizer specs, e.g. B128/DE,Rank-1/Linear")
      ->required();
  analyze_cmd->add_option("--seed", analyze_seed, "Seed for stochastic-rounding schemes");
  analyze_cmd->add_option("--out", analyze_out, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) return cmd_sweep(sweep_configs, sweep_out, jobs);
    if (*bound_cmd) return cmd_bound_check(bound_config, runs, bound_seed, bound_out);
    if (*analyze_cmd) return cmd_analyze(input, schemes, analyze_seed, analyze_out);
  } catch (const lowbit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const lowbit::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kConfigError;
  } catch (const lowbit::ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return 0;
}
