#ifndef GRIDSHED_HARNESS_HPP
#define GRIDSHED_HARNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include "gridshed/protection.hpp"

namespace gridshed {

enum class RunScheme { None, NPS, RPS };

struct WeightSpec {
  // uniform unless per-kind or explicit values are given
  double load_weight = 1.0;
  double generator_weight = 1.0;
  std::optional<Vec> explicit_weights;
};

struct ScenarioConfig {
  std::string case_path;
  std::vector<int> sever_branches;   // 1-based ids
  std::optional<Vec> explicit_delta; // overrides sever list when set
  RunScheme scheme = RunScheme::None;
  int m = 4;
  std::optional<std::pair<int, int>> rps_steps;  // defaults (m-1, m)
  std::optional<double> default_threshold;  // overrides every branch when set
  std::vector<std::pair<int, double>> threshold_overrides;  // (1-based id, value)
  SmoothingParams smoothing;
  SolverConfig solver;
  WeightSpec weights;
  std::string output_dir;
  int max_steps = 50;
};

struct ScenarioReport {
  int exit_code = 1;
  bool disturbance_found = false;
  bool verified = false;
  double objective = 0.0;
  bool fallback_used = false;
  CascadeMetrics final_metrics;
  std::string error;
};

ScenarioConfig scenario_from_json_file(const std::string& path);

ScenarioReport run_scenario(const ScenarioConfig& config);

struct SweepConfig {
  std::vector<double> gamma_values;
  ScenarioConfig base_scenario;
};

struct SweepRow {
  double gamma = 0.0;
  std::string scheme;
  bool ok = false;
  CascadeMetrics metrics;
  double objective = 0.0;
  std::string error;
};

/// Runs NPS (m = 4) and RPS (steps 3,4) per gamma with W_gen = gamma, W_load = 1.
std::vector<SweepRow> weight_sweep(const SweepConfig& config);

/// The paper-style grid 0.1, 0.2, ..., 1, 2, ..., 10 restricted to [lo, hi].
std::vector<double> default_gamma_grid(double lo = 0.1, double hi = 10.0);

void emit_plot_data(const ProtectionOutcome& outcome, const PowerNetwork& network,
                    const std::string& out_dir);

void write_cascade_csv(const CascadeTrajectory& trajectory, const PowerNetwork& network,
                       const std::string& path);

/// Max component change over t in [t_from, end] relative to component range.
double trajectory_settling_ratio(const IntegrationResult& result, double t_from);

}  // namespace gridshed

#endif
