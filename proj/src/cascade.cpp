#include "gridshed/cascade.hpp"

#include <cmath>
#include <stdexcept>

namespace gridshed {

double survival_factor(double flow, double threshold, const SmoothingParams& params) {
  const double c2 = threshold * threshold;
  if (params.hard_threshold) return std::abs(flow) <= threshold ? 1.0 : 0.0;
  const double half_band = M_PI / (2.0 * params.sigma_smooth);
  const double f2 = flow * flow;
  if (f2 >= c2 + half_band) return 0.0;
  if (f2 <= c2 - half_band) return 1.0;
  return 0.5 * (1.0 - std::sin(params.sigma_smooth * (f2 - c2)));
}

double survival_derivative(double flow, double threshold, const SmoothingParams& params) {
  if (params.hard_threshold)
    throw std::invalid_argument(
        "survival derivative is undefined in hard-threshold mode");
  const double c2 = threshold * threshold;
  const double half_band = M_PI / (2.0 * params.sigma_smooth);
  const double f2 = flow * flow;
  if (f2 >= c2 + half_band || f2 <= c2 - half_band) return 0.0;
  return -params.sigma_smooth * flow * std::cos(params.sigma_smooth * (f2 - c2));
}

Vec survival_factors(const Vec& flows, const Vec& thresholds,
                     const SmoothingParams& params) {
  Vec g(flows.size());
  for (int l = 0; l < flows.size(); ++l)
    g[l] = survival_factor(flows[l], thresholds[l], params);
  return g;
}

Vec survival_derivatives(const Vec& flows, const Vec& thresholds,
                         const SmoothingParams& params) {
  Vec g(flows.size());
  for (int l = 0; l < flows.size(); ++l)
    g[l] = survival_derivative(flows[l], thresholds[l], params);
  return g;
}

const CascadeState& CascadeTrajectory::state_at(int step) const {
  if (step < 1 || step > static_cast<int>(states.size()))
    throw std::out_of_range("no cascade state recorded for step " +
                            std::to_string(step));
  return states[step - 1];
}

Vec CascadeTrajectory::admittance_at(int step) const {
  if (step < 1) throw std::out_of_range("cascading steps are 1-based");
  if (step <= static_cast<int>(states.size())) return states[step - 1].admittance;
  if (!quiescent)
    throw std::out_of_range("trajectory not simulated through step " +
                            std::to_string(step));
  return states.back().admittance;
}

CascadeState cascade_step(const PowerNetwork& network, const CascadeState& state,
                          const Vec& injections, const SmoothingParams& params) {
  const FlowSolution sol = solve_flow(network, state.admittance, injections);
  const Vec g = survival_factors(sol.branch_flows, network.flow_thresholds(), params);
  CascadeState next;
  next.step = state.step + 1;
  next.admittance = g.cwiseProduct(state.admittance);
  next.injections = injections;
  next.flows = solve_flow(network, next.admittance, injections).branch_flows;
  return next;
}

CascadeTrajectory simulate(const PowerNetwork& network, const Vec& initial_admittance,
                           const Vec& injections, const SmoothingParams& params,
                           int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  const Vec thresholds = network.flow_thresholds();
  CascadeTrajectory traj;
  Vec admittance = initial_admittance;
  for (int k = 1; k <= max_steps; ++k) {
    CascadeState state;
    state.step = k;
    state.admittance = admittance;
    state.injections = injections;
    state.flows = solve_flow(network, admittance, injections).branch_flows;
    const Vec next =
        survival_factors(state.flows, thresholds, params).cwiseProduct(admittance);
    traj.states.push_back(std::move(state));
    traj.terminated_at = k;
    if ((next - admittance).cwiseAbs().maxCoeff() <= kQuiescenceTol) {
      traj.quiescent = true;
      return traj;
    }
    admittance = next;
  }
  traj.quiescent = false;
  return traj;
}

CascadeMetrics metrics(const PowerNetwork& network, const CascadeState& state) {
  CascadeMetrics m;
  for (int l = 0; l < network.branch_count(); ++l) {
    if (state.admittance[l] > kConnectedTol) ++m.n_connected;
    if (std::abs(state.flows[l]) > kActiveFlowTol) ++m.n_active;
    m.total_power += std::abs(state.flows[l]);
  }
  const Vec p0 = network.base_injections();
  for (int i = 0; i < network.bus_count(); ++i)
    m.shed_power += std::abs(p0[i] - state.injections[i]);
  return m;
}

}  // namespace gridshed
