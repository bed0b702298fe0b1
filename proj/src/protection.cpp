#include "gridshed/protection.hpp"

#include <cmath>
#include <stdexcept>

namespace gridshed {

namespace {

constexpr double kFlowCheckTol = 1e-6;

Vec clamp_to_box(const Vec& p, const Vec& lo, const Vec& hi) {
  return p.cwiseMax(lo).cwiseMin(hi);
}

CascadeState make_state(const PowerNetwork& network, int step, const Vec& admittance,
                        const Vec& injections) {
  CascadeState s;
  s.step = step;
  s.admittance = admittance;
  s.injections = injections;
  s.flows = solve_flow(network, admittance, injections).branch_flows;
  return s;
}

/// Continues a trajectory from its last state under fixed injections with the
/// hard threshold rule until the topology stops changing.
void continue_hard(const PowerNetwork& network, CascadeTrajectory& traj,
                   int max_steps) {
  const SmoothingParams hard{1e3, true};
  const Vec thresholds = network.flow_thresholds();
  while (traj.terminated_at < max_steps) {
    const CascadeState& last = traj.states.back();
    const Vec next = survival_factors(last.flows, thresholds, hard)
                         .cwiseProduct(last.admittance);
    if ((next - last.admittance).cwiseAbs().maxCoeff() <= kQuiescenceTol) {
      traj.quiescent = true;
      return;
    }
    traj.states.push_back(
        make_state(network, last.step + 1, next, last.injections));
    traj.terminated_at = last.step + 1;
  }
  traj.quiescent = false;
}

bool states_within_limits(const PowerNetwork& network, const CascadeTrajectory& traj,
                          int from_step) {
  const Vec limits = network.flow_thresholds();
  for (const CascadeState& s : traj.states) {
    if (s.step < from_step) continue;
    for (int l = 0; l < network.branch_count(); ++l)
      if (std::abs(s.flows[l]) > limits[l] + kFlowCheckTol) return false;
  }
  return true;
}

}  // namespace

std::optional<DisturbanceEvent> identify_disturbance(const PowerNetwork& reference,
                                                     const Vec& observed_admittance) {
  if (observed_admittance.size() != reference.branch_count())
    throw ValidationError("observed admittance length mismatch");
  const Vec y0 = reference.base_admittance();
  DisturbanceEvent event;
  event.delta = observed_admittance - y0;
  if (event.delta.cwiseAbs().maxCoeff() <= 1e-12) return std::nullopt;
  for (int l = 0; l < reference.branch_count(); ++l)
    if (observed_admittance[l] <= kConnectedTol && y0[l] > 0.0)
      event.severed_branches.push_back(reference.branch(l).id);
  return event;
}

FlowCheck verify_flows(const PowerNetwork& network, const Vec& admittance,
                       const Vec& injections, const Vec& limits) {
  const FlowSolution sol = solve_flow(network, admittance, injections);
  FlowCheck check;
  for (int l = 0; l < network.branch_count(); ++l) {
    const double mag = std::abs(sol.branch_flows[l]);
    if (mag > limits[l] + kFlowCheckTol) {
      check.ok = false;
      check.violations.push_back({network.branch(l).id, mag, limits[l]});
    }
  }
  return check;
}

ProtectionOutcome run_nps(const PowerNetwork& network, const DisturbanceEvent& event,
                          int m, const SolverConfig& solver_config,
                          const SmoothingParams& smoothing) {
  if (m < 2)
    throw std::invalid_argument("NPS shedding step m must be >= 2");
  const Vec p0 = network.base_injections();
  const Vec y1 = apply_disturbance(network, event.delta);
  const int max_steps = std::max(50, m + 1);
  const CascadeTrajectory unprotected =
      simulate(network, y1, p0, smoothing, max_steps);

  ProtectionOutcome out;
  out.problem = build_nps_problem(network, unprotected, m);
  out.solver_result = integrate(out.problem, solver_config);
  const Vec plan_injection =
      clamp_to_box(out.solver_result.solution.primal.at(0),
                   out.problem.lower_bound, out.problem.upper_bound);
  out.plan.scheme = Scheme::NPS;
  out.plan.per_step[m] = plan_injection;
  out.objective = objective_value(out.problem, {plan_injection});

  // protected trajectory: unprotected prediction through m-1, shed at m,
  // then the hard-threshold continuation
  CascadeTrajectory traj;
  for (int k = 1; k < m; ++k)
    traj.states.push_back(
        make_state(network, k, unprotected.admittance_at(k), p0));
  traj.states.push_back(
      make_state(network, m, out.problem.frozen_admittance, plan_injection));
  traj.terminated_at = m;
  continue_hard(network, traj, max_steps);

  out.trajectory = std::move(traj);
  out.final_metrics = metrics(network, out.trajectory.states.back());
  out.verified = out.trajectory.quiescent &&
                 states_within_limits(network, out.trajectory, m);
  return out;
}

ProtectionOutcome run_rps(const PowerNetwork& network, const DisturbanceEvent& event,
                          int m, const SolverConfig& solver_config,
                          const SmoothingParams& smoothing) {
  if (m < 3)
    throw std::invalid_argument("RPS shedding steps (m-1, m) require m >= 3");
  const Vec p0 = network.base_injections();
  const Vec y1 = apply_disturbance(network, event.delta);
  const int max_steps = std::max(50, m + 1);
  const CascadeTrajectory unprotected =
      simulate(network, y1, p0, smoothing, max_steps);

  ProtectionOutcome out;
  out.problem = build_rps_problem(network, unprotected, m, smoothing);
  out.solver_result = integrate(out.problem, solver_config);
  const Vec plan_prev =
      clamp_to_box(out.solver_result.solution.primal.at(0),
                   out.problem.lower_bound, out.problem.upper_bound);
  const Vec plan_curr =
      clamp_to_box(out.solver_result.solution.primal.at(1),
                   out.problem.lower_bound, out.problem.upper_bound);
  out.objective = objective_value(out.problem, {plan_prev, plan_curr});
  out.plan.scheme = Scheme::RPS;

  // exact step-m flows under the two-step plan (the linearized model only
  // bounds the approximation)
  const Vec& y_prev = out.problem.frozen_admittance;
  const Vec flows_prev = solve_flow(network, y_prev, plan_prev).branch_flows;
  const Vec y_m_exact =
      survival_factors(flows_prev, network.flow_thresholds(), smoothing)
          .cwiseProduct(y_prev);
  const FlowCheck exact_check =
      verify_flows(network, y_m_exact, plan_curr, network.flow_thresholds());

  if (exact_check.ok) {
    out.plan.fallback_used = false;
    out.plan.per_step[m - 1] = plan_prev;
    out.plan.per_step[m] = plan_curr;

    CascadeTrajectory traj;
    for (int k = 1; k <= m - 2; ++k)
      traj.states.push_back(
          make_state(network, k, unprotected.admittance_at(k), p0));
    traj.states.push_back(make_state(network, m - 1, y_prev, plan_prev));
    traj.states.push_back(make_state(network, m, y_m_exact, plan_curr));
    traj.terminated_at = m;
    continue_hard(network, traj, max_steps);

    out.trajectory = std::move(traj);
    out.final_metrics = metrics(network, out.trajectory.states.back());
    out.verified = out.trajectory.quiescent &&
                   states_within_limits(network, out.trajectory, m);
    return out;
  }

  // Remedy: apply the one-shot NPS solution instead.
  ProtectionOutcome nps = run_nps(network, event, m, solver_config, smoothing);
  out.plan.fallback_used = true;
  out.plan.per_step = nps.plan.per_step;
  out.trajectory = std::move(nps.trajectory);
  out.final_metrics = nps.final_metrics;
  out.verified = nps.verified;
  return out;
}

}  // namespace gridshed
