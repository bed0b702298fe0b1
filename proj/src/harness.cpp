#include "gridshed/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridshed {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void apply_scenario_to_network(PowerNetwork& network, const ScenarioConfig& config) {
  if (config.default_threshold || !config.threshold_overrides.empty()) {
    Vec c = network.flow_thresholds();
    if (config.default_threshold) c.setConstant(*config.default_threshold);
    for (const auto& [id, value] : config.threshold_overrides) {
      if (id < 1 || id > network.branch_count())
        throw ValidationError("threshold override references unknown branch " +
                              std::to_string(id));
      c[id - 1] = value;
    }
    network.set_flow_thresholds(c);
  }
  if (config.weights.explicit_weights) {
    network.set_weights(*config.weights.explicit_weights);
  } else if (config.weights.load_weight != 1.0 ||
             config.weights.generator_weight != 1.0) {
    Vec w(network.bus_count());
    for (int i = 0; i < network.bus_count(); ++i)
      w[i] = network.bus(i).kind == BusKind::Generator
                 ? config.weights.generator_weight
                 : config.weights.load_weight;
    network.set_weights(w);
  }
}

Vec build_delta(const PowerNetwork& network, const ScenarioConfig& config) {
  if (config.explicit_delta) {
    if (config.explicit_delta->size() != network.branch_count())
      throw ValidationError("explicit delta length mismatch");
    return *config.explicit_delta;
  }
  Vec delta = Vec::Zero(network.branch_count());
  for (int id : config.sever_branches) {
    if (id < 1 || id > network.branch_count())
      throw ValidationError("sever list references unknown branch " +
                            std::to_string(id));
    delta[id - 1] = -network.branch(id - 1).admittance;
  }
  return delta;
}

json metrics_to_json(const CascadeMetrics& m) {
  return json{{"n_connected", m.n_connected},
              {"n_active", m.n_active},
              {"total_power", m.total_power},
              {"shed_power", m.shed_power}};
}

json cascade_summary(const PowerNetwork& network, const CascadeTrajectory& traj) {
  json steps = json::array();
  for (const CascadeState& s : traj.states) {
    const CascadeMetrics m = metrics(network, s);
    steps.push_back(json{{"step", s.step},
                         {"n_connected", m.n_connected},
                         {"n_active", m.n_active},
                         {"total_power", m.total_power}});
  }
  return json{{"terminated_at", traj.terminated_at},
              {"quiescent", traj.quiescent},
              {"steps", steps}};
}

std::string scheme_name(RunScheme s) {
  switch (s) {
    case RunScheme::None: return "none";
    case RunScheme::NPS: return "nps";
    case RunScheme::RPS: return "rps";
  }
  return "none";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace

void write_cascade_csv(const CascadeTrajectory& trajectory, const PowerNetwork& network,
                       const std::string& path) {
  std::string csv = "step,branch,admittance,flow\n";
  for (const CascadeState& s : trajectory.states)
    for (int l = 0; l < network.branch_count(); ++l)
      csv += std::to_string(s.step) + "," + std::to_string(network.branch(l).id) +
             "," + fmt(s.admittance[l]) + "," + fmt(s.flows[l]) + "\n";
  write_text_file(path, csv);
}

double trajectory_settling_ratio(const IntegrationResult& result, double t_from) {
  if (result.trajectory.size() < 2) return 0.0;
  const Eigen::Index dim = result.trajectory.front().flatten().size();
  Vec lo = Vec::Constant(dim, std::numeric_limits<double>::infinity());
  Vec hi = Vec::Constant(dim, -std::numeric_limits<double>::infinity());
  Vec wlo = lo, whi = hi;
  bool window_nonempty = false;
  for (const SaddleState& s : result.trajectory) {
    const Vec x = s.flatten();
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
    if (s.time >= t_from) {
      wlo = wlo.cwiseMin(x);
      whi = whi.cwiseMax(x);
      window_nonempty = true;
    }
  }
  if (!window_nonempty) return 0.0;  // converged before the window opened
  double ratio = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double range = hi[i] - lo[i];
    if (range <= 1e-12) continue;
    ratio = std::max(ratio, (whi[i] - wlo[i]) / range);
  }
  return ratio;
}

void emit_plot_data(const ProtectionOutcome& outcome, const PowerNetwork& network,
                    const std::string& out_dir) {
  fs::create_directories(out_dir);
  const SheddingProblem& problem = outcome.problem;
  const int n = network.bus_count();
  std::vector<int> plan_steps;
  for (const auto& [step, _] : outcome.plan.per_step) plan_steps.push_back(step);
  std::sort(plan_steps.begin(), plan_steps.end());
  const int blocks = problem.primal_blocks();
  // block k sheds at solver_steps[k]; under RPS fallback the plan holds one
  // step but the solver state still carries two blocks
  std::vector<int> solver_steps;
  if (problem.variant == Scheme::RPS) {
    const int m = plan_steps.back();
    solver_steps = {outcome.plan.fallback_used ? m - 1 : plan_steps.front(), m};
  } else {
    solver_steps = {plan_steps.back()};
  }

  std::string header = "time";
  for (int b = 0; b < blocks; ++b)
    for (int i = 0; i < n; ++i)
      header += ",P" + std::to_string(solver_steps[b]) + "_" +
                std::to_string(network.bus(i).id);
  for (int e : problem.constrained_edges)
    header += ",lambda_" + std::to_string(network.branch(e).id);
  for (int b = 0; b < blocks; ++b)
    for (int i = 0; i < n; ++i)
      header += ",tauU" + std::to_string(solver_steps[b]) + "_" +
                std::to_string(network.bus(i).id);
  for (int b = 0; b < blocks; ++b)
    for (int i = 0; i < n; ++i)
      header += ",tauL" + std::to_string(solver_steps[b]) + "_" +
                std::to_string(network.bus(i).id);
  std::string csv = header + "\n";
  for (const SaddleState& s : outcome.solver_result.trajectory) {
    csv += fmt(s.time);
    for (int b = 0; b < blocks; ++b)
      for (int i = 0; i < n; ++i) csv += "," + fmt(s.primal[b][i]);
    for (Eigen::Index e = 0; e < s.lambda.size(); ++e) csv += "," + fmt(s.lambda[e]);
    for (int b = 0; b < blocks; ++b)
      for (int i = 0; i < n; ++i) csv += "," + fmt(s.tau_upper[b][i]);
    for (int b = 0; b < blocks; ++b)
      for (int i = 0; i < n; ++i) csv += "," + fmt(s.tau_lower[b][i]);
    csv += "\n";
  }
  write_text_file((fs::path(out_dir) / "solver_trajectory.csv").string(), csv);

  // shed amounts: P_i - P0_i per planned step, one column per step
  const Vec p0 = network.base_injections();
  std::string shed = "bus";
  for (int step : plan_steps) shed += ",shed_step" + std::to_string(step);
  shed += "\n";
  for (int i = 0; i < n; ++i) {
    shed += std::to_string(network.bus(i).id);
    for (int step : plan_steps)
      shed += "," + fmt(outcome.plan.per_step.at(step)[i] - p0[i]);
    shed += "\n";
  }
  write_text_file((fs::path(out_dir) / "shed_amounts.csv").string(), shed);
}

ScenarioConfig scenario_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid config JSON: ") + e.what());
  }
  ScenarioConfig c;
  c.case_path = doc.value("case", "");
  if (doc.contains("sever"))
    c.sever_branches = doc["sever"].get<std::vector<int>>();
  if (doc.contains("delta")) {
    const auto v = doc["delta"].get<std::vector<double>>();
    c.explicit_delta = Eigen::Map<const Vec>(v.data(), v.size());
  }
  const std::string scheme = doc.value("scheme", "none");
  if (scheme == "none") c.scheme = RunScheme::None;
  else if (scheme == "nps") c.scheme = RunScheme::NPS;
  else if (scheme == "rps") c.scheme = RunScheme::RPS;
  else throw ParseError("unknown scheme '" + scheme + "'");
  c.m = doc.value("m", 4);
  if (doc.contains("rps_steps")) {
    const auto v = doc["rps_steps"].get<std::vector<int>>();
    if (v.size() != 2) throw ParseError("rps_steps must hold two steps");
    c.rps_steps = std::make_pair(v[0], v[1]);
  }
  if (doc.contains("threshold")) c.default_threshold = doc["threshold"].get<double>();
  if (doc.contains("threshold_overrides"))
    for (const auto& item : doc["threshold_overrides"])
      c.threshold_overrides.emplace_back(item.at(0).get<int>(), item.at(1).get<double>());
  c.smoothing.sigma_smooth = doc.value("sigma", 1e3);
  c.smoothing.hard_threshold = doc.value("hard_threshold", false);
  c.solver.dt = doc.value("dt", 0.1);
  c.solver.horizon = doc.value("horizon", 10.0);
  c.solver.convergence_tol = doc.value("convergence_tol", 1e-6);
  c.solver.kkt_tol = doc.value("kkt_tol", 1e-4);
  if (doc.contains("gamma")) c.weights.generator_weight = doc["gamma"].get<double>();
  if (doc.contains("weights")) {
    const auto& jw = doc["weights"];
    if (jw.is_array()) {
      const auto v = jw.get<std::vector<double>>();
      c.weights.explicit_weights = Eigen::Map<const Vec>(v.data(), v.size());
    } else {
      c.weights.load_weight = jw.value("load", 1.0);
      c.weights.generator_weight = jw.value("gen", 1.0);
    }
  }
  c.output_dir = doc.value("out", "");
  c.max_steps = doc.value("max_steps", 50);
  return c;
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
  ScenarioReport report;
  try {
    PowerNetwork network = load_case_file(config.case_path);
    apply_scenario_to_network(network, config);
    const Vec delta = build_delta(network, config);
    const Vec observed = network.base_admittance() + delta;
    const auto event = identify_disturbance(network, observed);

    const bool want_files = !config.output_dir.empty();
    if (want_files) fs::create_directories(config.output_dir);
    json doc;
    doc["scheme"] = scheme_name(config.scheme);
    doc["case"] = config.case_path;

    if (!event) {
      report.disturbance_found = false;
      report.exit_code = 0;
      report.verified = true;
      doc["disturbance"] = false;
      doc["note"] = "no disturbance detected; protection not engaged";
      if (want_files)
        write_text_file((fs::path(config.output_dir) / "metrics.json").string(),
                        doc.dump(2) + "\n");
      return report;
    }
    report.disturbance_found = true;
    doc["disturbance"] = true;
    doc["severed_branches"] = event->severed_branches;

    if (config.scheme == RunScheme::None) {
      const Vec y1 = apply_disturbance(network, event->delta);
      const CascadeTrajectory traj = simulate(
          network, y1, network.base_injections(), config.smoothing, config.max_steps);
      report.final_metrics = metrics(network, traj.states.back());
      report.verified = true;
      report.exit_code = 0;
      doc["cascade"] = cascade_summary(network, traj);
      doc["final_metrics"] = metrics_to_json(report.final_metrics);
      if (want_files) {
        write_cascade_csv(traj, network,
                          (fs::path(config.output_dir) / "cascade.csv").string());
        write_text_file((fs::path(config.output_dir) / "metrics.json").string(),
                        doc.dump(2) + "\n");
      }
      return report;
    }

    int m = config.m;
    if (config.scheme == RunScheme::RPS && config.rps_steps) {
      if (config.rps_steps->second != config.rps_steps->first + 1)
        throw ValidationError("rps_steps must be consecutive");
      m = config.rps_steps->second;
    }
    const ProtectionOutcome outcome =
        config.scheme == RunScheme::NPS
            ? run_nps(network, *event, m, config.solver, config.smoothing)
            : run_rps(network, *event, m, config.solver, config.smoothing);

    report.objective = outcome.objective;
    report.fallback_used = outcome.plan.fallback_used;
    report.verified = outcome.verified;
    report.final_metrics = outcome.final_metrics;
    report.exit_code = outcome.verified ? 0 : 2;

    const double settle = trajectory_settling_ratio(outcome.solver_result, 4.0);
    doc["m"] = m;
    doc["objective"] = outcome.objective;
    doc["fallback_used"] = outcome.plan.fallback_used;
    doc["verified"] = outcome.verified;
    doc["solver_converged"] = outcome.solver_result.converged;
    doc["final_metrics"] = metrics_to_json(outcome.final_metrics);
    doc["cascade"] = cascade_summary(network, outcome.trajectory);
    doc["settling_ratio_after_4s"] = settle;
    doc["trajectory_settled_after_4s"] = settle <= 1e-3;
    {
      json sheds;
      const Vec p0 = network.base_injections();
      for (const auto& [step, injections] : outcome.plan.per_step) {
        json per_bus;
        for (int i = 0; i < network.bus_count(); ++i)
          per_bus[std::to_string(network.bus(i).id)] = injections[i] - p0[i];
        sheds[std::to_string(step)] = per_bus;
      }
      doc["shed_amounts"] = sheds;
    }
    if (want_files) {
      write_cascade_csv(outcome.trajectory, network,
                        (fs::path(config.output_dir) / "cascade.csv").string());
      emit_plot_data(outcome, network, config.output_dir);
      write_text_file((fs::path(config.output_dir) / "metrics.json").string(),
                      doc.dump(2) + "\n");
    }
    return report;
  } catch (const std::exception& e) {
    report.error = e.what();
    report.exit_code = 1;
    return report;
  }
}

std::vector<double> default_gamma_grid(double lo, double hi) {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  for (int i = 2; i <= 10; ++i) grid.push_back(static_cast<double>(i));
  std::vector<double> out;
  for (double g : grid)
    if (g >= lo - 1e-12 && g <= hi + 1e-12) out.push_back(g);
  return out;
}

std::vector<SweepRow> weight_sweep(const SweepConfig& config) {
  if (config.gamma_values.empty())
    throw std::invalid_argument("gamma sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double gamma : config.gamma_values) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma values must be positive");
    for (int which = 0; which < 2; ++which) {
      ScenarioConfig sc = config.base_scenario;
      sc.output_dir.clear();
      sc.weights = WeightSpec{1.0, gamma, std::nullopt};
      if (which == 0) {
        sc.scheme = RunScheme::NPS;
        sc.m = 4;
        sc.rps_steps.reset();
      } else {
        sc.scheme = RunScheme::RPS;
        sc.rps_steps = std::make_pair(3, 4);
        sc.m = 4;
      }
      const ScenarioReport rep = run_scenario(sc);
      SweepRow row;
      row.gamma = gamma;
      row.scheme = which == 0 ? "nps" : "rps";
      row.ok = rep.exit_code != 1;
      row.metrics = rep.final_metrics;
      row.objective = rep.objective;
      row.error = rep.error;
      rows.push_back(std::move(row));
    }
  }
  if (!config.base_scenario.output_dir.empty()) {
    fs::create_directories(config.base_scenario.output_dir);
    std::string csv =
        "gamma,scheme,ok,n_connected,n_active,total_power,shed_power,objective\n";
    for (const SweepRow& r : rows)
      csv += fmt(r.gamma) + "," + r.scheme + "," + (r.ok ? "1" : "0") + "," +
             std::to_string(r.metrics.n_connected) + "," +
             std::to_string(r.metrics.n_active) + "," + fmt(r.metrics.total_power) +
             "," + fmt(r.metrics.shed_power) + "," + fmt(r.objective) + "\n";
    write_text_file(
        (fs::path(config.base_scenario.output_dir) / "sweep.csv").string(), csv);
  }
  return rows;
}

}  // namespace gridshed
