#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridshed/harness.hpp"

namespace {

using namespace gridshed;

std::vector<double> parse_gammas(const std::string& spec) {
  // "a:b" expands to the standard grid restricted to [a,b]; otherwise a
  // comma-separated list
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const double lo = std::stod(spec.substr(0, colon));
    const double hi = std::stod(spec.substr(colon + 1));
    return default_gamma_grid(lo, hi);
  }
  std::vector<double> values;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) values.push_back(std::stod(item));
  return values;
}

void add_common_flags(CLI::App* cmd, ScenarioConfig& config, std::string& config_path,
                      std::string& scheme, std::string& rps_steps, double& gamma,
                      std::string& sever) {
  cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  cmd->add_option("--case", config.case_path, "case file (.json native or .m)");
  cmd->add_option("--sever", sever, "comma-separated branch ids to sever");
  cmd->add_option("--scheme", scheme, "none | nps | rps");
  cmd->add_option("--m", config.m, "cascading step of the shedding action");
  cmd->add_option("--rps-steps", rps_steps, "two consecutive steps, e.g. 3,4");
  cmd->add_option("--sigma", config.smoothing.sigma_smooth, "survival smoothness");
  cmd->add_flag("--hard-threshold", config.smoothing.hard_threshold,
                "step-function survival rule");
  cmd->add_option("--dt", config.solver.dt, "Euler step, seconds");
  cmd->add_option("--horizon", config.solver.horizon, "integration horizon, seconds");
  cmd->add_option("--gamma", gamma, "generator/load weight ratio W_g / W_l");
  cmd->add_option("--out", config.output_dir, "output directory");
  cmd->add_option("--max-steps", config.max_steps, "cascade step cap");
}

void merge_flags(const CLI::App* cmd, ScenarioConfig& file_config,
                 const ScenarioConfig& flag_config, const std::string& scheme,
                 const std::string& rps_steps, double gamma, const std::string& sever,
                 double threshold, bool threshold_set) {
  auto used = [cmd](const std::string& name) { return cmd->count(name) > 0; };
  if (used("--case")) file_config.case_path = flag_config.case_path;
  if (used("--sever")) {
    file_config.sever_branches.clear();
    std::stringstream ss(sever);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) file_config.sever_branches.push_back(std::stoi(item));
    file_config.explicit_delta.reset();
  }
  if (used("--scheme")) {
    if (scheme == "none") file_config.scheme = RunScheme::None;
    else if (scheme == "nps") file_config.scheme = RunScheme::NPS;
    else if (scheme == "rps") file_config.scheme = RunScheme::RPS;
    else throw CLI::ValidationError("--scheme", "must be none, nps or rps");
  }
  if (used("--m")) file_config.m = flag_config.m;
  if (used("--rps-steps")) {
    const auto comma = rps_steps.find(',');
    if (comma == std::string::npos)
      throw CLI::ValidationError("--rps-steps", "expected a,b");
    file_config.rps_steps = std::make_pair(std::stoi(rps_steps.substr(0, comma)),
                                           std::stoi(rps_steps.substr(comma + 1)));
  }
  if (used("--sigma")) file_config.smoothing.sigma_smooth = flag_config.smoothing.sigma_smooth;
  if (used("--hard-threshold")) file_config.smoothing.hard_threshold = true;
  if (used("--dt")) file_config.solver.dt = flag_config.solver.dt;
  if (used("--horizon")) file_config.solver.horizon = flag_config.solver.horizon;
  if (used("--gamma")) file_config.weights = WeightSpec{1.0, gamma, std::nullopt};
  if (used("--out")) file_config.output_dir = flag_config.output_dir;
  if (used("--max-steps")) file_config.max_steps = flag_config.max_steps;
  if (threshold_set) file_config.default_threshold = threshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascading-outage simulator and optimal load-shedding solver"};
  app.require_subcommand(1);

  ScenarioConfig run_flags;
  std::string run_config_path, run_scheme, run_rps_steps, run_sever;
  double run_gamma = 1.0, run_threshold = 1.0;
  CLI::App* run = app.add_subcommand("run", "run one scenario");
  add_common_flags(run, run_flags, run_config_path, run_scheme, run_rps_steps,
                   run_gamma, run_sever);
  auto* thr_opt = run->add_option("--threshold", run_threshold,
                                  "uniform flow threshold override, pu");

  ScenarioConfig sweep_flags;
  std::string sweep_config_path, sweep_scheme, sweep_rps_steps, sweep_sever;
  std::string gamma_spec = "0.1:10";
  double sweep_gamma = 1.0, sweep_threshold = 1.0;
  CLI::App* sweep = app.add_subcommand("sweep", "gamma weight-ratio sweep");
  add_common_flags(sweep, sweep_flags, sweep_config_path, sweep_scheme,
                   sweep_rps_steps, sweep_gamma, sweep_sever);
  auto* sweep_thr_opt = sweep->add_option("--threshold", sweep_threshold,
                                          "uniform flow threshold override, pu");
  sweep->add_option("--gammas", gamma_spec, "grid spec 'a:b' or comma list");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ScenarioConfig config = run_config_path.empty()
                                  ? ScenarioConfig{}
                                  : scenario_from_json_file(run_config_path);
      merge_flags(run, config, run_flags, run_scheme, run_rps_steps, run_gamma,
                  run_sever, run_threshold, thr_opt->count() > 0);
      if (config.case_path.empty()) {
        std::cerr << "error: no case file given\n";
        return 1;
      }
      const ScenarioReport report = run_scenario(config);
      if (!report.error.empty()) std::cerr << "error: " << report.error << "\n";
      if (report.exit_code == 0 && report.disturbance_found &&
          config.scheme != RunScheme::None)
        std::printf("objective %.6g  verified %s  fallback %s\n", report.objective,
                    report.verified ? "yes" : "no",
                    report.fallback_used ? "yes" : "no");
      return report.exit_code;
    }
    ScenarioConfig base = sweep_config_path.empty()
                              ? ScenarioConfig{}
                              : scenario_from_json_file(sweep_config_path);
    merge_flags(sweep, base, sweep_flags, sweep_scheme, sweep_rps_steps, sweep_gamma,
                sweep_sever, sweep_threshold, sweep_thr_opt->count() > 0);
    if (base.case_path.empty()) {
      std::cerr << "error: no case file given\n";
      return 1;
    }
    SweepConfig config{parse_gammas(gamma_spec), base};
    const auto rows = weight_sweep(config);
    int failures = 0;
    for (const auto& r : rows) {
      std::printf("gamma %-5g %s  ncb %-3d nab %-3d Pt %-9.4f Pm %-9.4f obj %.6g%s\n",
                  r.gamma, r.scheme.c_str(), r.metrics.n_connected,
                  r.metrics.n_active, r.metrics.total_power, r.metrics.shed_power,
                  r.objective, r.ok ? "" : ("  FAILED: " + r.error).c_str());
      if (!r.ok) ++failures;
    }
    return failures == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
