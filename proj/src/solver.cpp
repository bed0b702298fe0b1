#include "gridshed/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gridshed {

namespace {

Mat select_rows(const Mat& full, const std::vector<int>& rows) {
  Mat out(static_cast<int>(rows.size()), full.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<int>(i)) = full.row(rows[i]);
  return out;
}

Vec select(const Vec& full, const std::vector<int>& idx) {
  Vec out(static_cast<int>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = full[idx[i]];
  return out;
}

std::vector<int> live_edges(const Vec& admittance) {
  std::vector<int> edges;
  for (int l = 0; l < admittance.size(); ++l)
    if (admittance[l] > kConnectedTol) edges.push_back(l);
  return edges;
}

void fill_common(SheddingProblem& p, const PowerNetwork& network) {
  p.network = &network;
  p.base_injection = network.base_injections();
  p.weights = network.weights();
  p.lower_bound = network.injection_lower();
  p.upper_bound = network.injection_upper();
  p.flow_limits = network.flow_thresholds();
}

double box_terms(const Vec& p, const Vec& tau_up, const Vec& tau_lo,
                 const Vec& ub, const Vec& lb) {
  return tau_up.dot(p - ub) + tau_lo.dot(lb - p);
}

}  // namespace

Vec SheddingProblem::constraint_flows(const std::vector<Vec>& primal) const {
  if (variant == Scheme::NPS) return edge_rows_curr * primal.at(0);
  return select(model.constant, constrained_edges) +
         edge_rows_prev * (primal.at(0) - base_injection) +
         edge_rows_curr * primal.at(1);
}

Vec SaddleState::flatten() const {
  Eigen::Index total = lambda.size();
  for (const Vec& p : primal) total += p.size();
  for (const Vec& t : tau_upper) total += t.size();
  for (const Vec& t : tau_lower) total += t.size();
  Vec out(total);
  Eigen::Index at = 0;
  for (const Vec& p : primal) { out.segment(at, p.size()) = p; at += p.size(); }
  out.segment(at, lambda.size()) = lambda;
  at += lambda.size();
  for (const Vec& t : tau_upper) { out.segment(at, t.size()) = t; at += t.size(); }
  for (const Vec& t : tau_lower) { out.segment(at, t.size()) = t; at += t.size(); }
  return out;
}

SaddleState SaddleState::like(const SaddleState& shape) {
  SaddleState s;
  for (const Vec& p : shape.primal) s.primal.push_back(Vec::Zero(p.size()));
  s.lambda = Vec::Zero(shape.lambda.size());
  for (const Vec& t : shape.tau_upper) s.tau_upper.push_back(Vec::Zero(t.size()));
  for (const Vec& t : shape.tau_lower) s.tau_lower.push_back(Vec::Zero(t.size()));
  s.time = shape.time;
  return s;
}

double SaddleState::max_abs_difference(const SaddleState& other) const {
  return (flatten() - other.flatten()).cwiseAbs().maxCoeff();
}

bool SaddleState::all_finite() const { return flatten().allFinite(); }

double KktResidual::max() const {
  return std::max(std::max(stationarity, primal_feasibility),
                  std::max(dual_feasibility, complementary_slackness));
}

SheddingProblem build_nps_problem(const PowerNetwork& network,
                                  const CascadeTrajectory& cascade, int m) {
  if (m < 1) throw std::invalid_argument("cascading step m must be >= 1");
  SheddingProblem p;
  p.variant = Scheme::NPS;
  fill_common(p, network);
  p.frozen_admittance = cascade.admittance_at(m);
  p.constrained_edges = live_edges(p.frozen_admittance);
  p.flow_jacobian = flow_jacobian_injections(network, p.frozen_admittance);
  p.edge_rows_curr = select_rows(p.flow_jacobian, p.constrained_edges);
  p.edge_limits = select(p.flow_limits, p.constrained_edges);
  return p;
}

SheddingProblem build_rps_problem(const PowerNetwork& network,
                                  const CascadeTrajectory& cascade, int m,
                                  const SmoothingParams& smoothing) {
  if (m < 2) throw std::invalid_argument("RPS needs m >= 2 so that m-1 >= 1");
  SheddingProblem p;
  p.variant = Scheme::RPS;
  fill_common(p, network);
  p.frozen_admittance = cascade.admittance_at(m - 1);
  p.model = rps_linearize(network, p.frozen_admittance, p.base_injection, smoothing);
  p.constrained_edges = live_edges(p.model.expansion_admittance);
  p.edge_rows_curr = select_rows(p.model.coeff_curr, p.constrained_edges);
  p.edge_rows_prev = select_rows(p.model.coeff_prev, p.constrained_edges);
  p.edge_limits = select(p.flow_limits, p.constrained_edges);
  return p;
}

double nps_lagrangian(const SaddleState& state, const SheddingProblem& problem) {
  const Vec& p = state.primal.at(0);
  const Vec diff = problem.weights.cwiseProduct(p - problem.base_injection);
  const Vec flows = problem.constraint_flows(state.primal);
  const Vec slack = flows.cwiseProduct(flows) -
                    problem.edge_limits.cwiseProduct(problem.edge_limits);
  return diff.squaredNorm() + state.lambda.dot(slack) +
         box_terms(p, state.tau_upper.at(0), state.tau_lower.at(0),
                   problem.upper_bound, problem.lower_bound);
}

double rps_lagrangian(const SaddleState& state, const SheddingProblem& problem) {
  double value = 0.0;
  for (int k = 0; k < 2; ++k) {
    const Vec diff =
        problem.weights.cwiseProduct(state.primal.at(k) - problem.base_injection);
    value += diff.squaredNorm();
    value += box_terms(state.primal.at(k), state.tau_upper.at(k), state.tau_lower.at(k),
                       problem.upper_bound, problem.lower_bound);
  }
  const Vec flows = problem.constraint_flows(state.primal);
  const Vec slack = flows.cwiseProduct(flows) -
                    problem.edge_limits.cwiseProduct(problem.edge_limits);
  return value + state.lambda.dot(slack);
}

double projection(double x, double y) {
  if (y < 0.0) throw std::invalid_argument("projection requires y >= 0");
  if (y > 0.0) return x;
  return std::max(x, 0.0);
}

namespace {

Vec project_each(const Vec& grad, const Vec& multiplier) {
  Vec out(grad.size());
  for (int i = 0; i < grad.size(); ++i) out[i] = projection(grad[i], multiplier[i]);
  return out;
}

SaddleState shared_rhs(const SaddleState& state, const SheddingProblem& problem) {
  SaddleState d = SaddleState::like(state);
  const Vec w2 = problem.weights.cwiseProduct(problem.weights);
  const Vec flows = problem.constraint_flows(state.primal);
  const Vec weighted = state.lambda.cwiseProduct(flows);

  for (int k = 0; k < problem.primal_blocks(); ++k) {
    const Mat& rows = (problem.variant == Scheme::NPS || k == 1)
                          ? problem.edge_rows_curr
                          : problem.edge_rows_prev;
    d.primal[k] =
        -2.0 * w2.cwiseProduct(state.primal[k] - problem.base_injection) -
        2.0 * (rows.transpose() * weighted) - (state.tau_upper[k] - state.tau_lower[k]);
    d.tau_upper[k] = project_each(state.primal[k] - problem.upper_bound,
                                  state.tau_upper[k]);
    d.tau_lower[k] = project_each(problem.lower_bound - state.primal[k],
                                  state.tau_lower[k]);
  }
  const Vec slack = flows.cwiseProduct(flows) -
                    problem.edge_limits.cwiseProduct(problem.edge_limits);
  d.lambda = project_each(slack, state.lambda);
  d.time = 1.0;
  return d;
}

}  // namespace

SaddleState nps_rhs(const SaddleState& state, const SheddingProblem& problem) {
  if (problem.variant != Scheme::NPS)
    throw std::invalid_argument("nps_rhs requires an NPS problem");
  return shared_rhs(state, problem);
}

SaddleState rps_rhs(const SaddleState& state, const SheddingProblem& problem) {
  if (problem.variant != Scheme::RPS)
    throw std::invalid_argument("rps_rhs requires an RPS problem");
  return shared_rhs(state, problem);
}

SaddleState saddle_rhs(const SaddleState& state, const SheddingProblem& problem) {
  return shared_rhs(state, problem);
}

SaddleState initial_state(const SheddingProblem& problem) {
  SaddleState s;
  const int n = static_cast<int>(problem.base_injection.size());
  for (int k = 0; k < problem.primal_blocks(); ++k) {
    s.primal.push_back(problem.base_injection);
    s.tau_upper.push_back(Vec::Zero(n));
    s.tau_lower.push_back(Vec::Zero(n));
  }
  s.lambda = Vec::Zero(static_cast<int>(problem.constrained_edges.size()));
  s.time = 0.0;
  return s;
}

IntegrationResult integrate(const SheddingProblem& problem, const SolverConfig& config) {
  if (!(config.dt > 0.0) || config.horizon < config.dt)
    throw std::invalid_argument("solver config requires dt > 0 and horizon >= dt");
  IntegrationResult out;
  SaddleState state = initial_state(problem);
  out.trajectory.push_back(state);
  const int steps = static_cast<int>(std::llround(config.horizon / config.dt));
  for (int k = 0; k < steps; ++k) {
    const SaddleState d = shared_rhs(state, problem);
    SaddleState next = state;
    for (int b = 0; b < problem.primal_blocks(); ++b) {
      next.primal[b] += config.dt * d.primal[b];
      next.tau_upper[b] =
          (next.tau_upper[b] + config.dt * d.tau_upper[b]).cwiseMax(0.0);
      next.tau_lower[b] =
          (next.tau_lower[b] + config.dt * d.tau_lower[b]).cwiseMax(0.0);
    }
    next.lambda = (next.lambda + config.dt * d.lambda).cwiseMax(0.0);
    next.time = (k + 1) * config.dt;
    if (!next.all_finite())
      throw DivergenceError("saddle dynamics diverged at step " + std::to_string(k + 1) +
                            " (t = " + std::to_string(next.time) + " s)");
    const double change = next.max_abs_difference(state);
    state = next;
    out.trajectory.push_back(state);
    if (change <= config.convergence_tol) {
      out.converged = true;
      break;
    }
  }
  out.solution = state;
  return out;
}

KktResidual kkt_residual(const SaddleState& state, const SheddingProblem& problem) {
  KktResidual r;
  const Vec w2 = problem.weights.cwiseProduct(problem.weights);
  const Vec flows = problem.constraint_flows(state.primal);
  const Vec weighted = state.lambda.cwiseProduct(flows);

  for (int k = 0; k < problem.primal_blocks(); ++k) {
    const Mat& rows = (problem.variant == Scheme::NPS || k == 1)
                          ? problem.edge_rows_curr
                          : problem.edge_rows_prev;
    const Vec stat =
        2.0 * w2.cwiseProduct(state.primal[k] - problem.base_injection) +
        2.0 * (rows.transpose() * weighted) + (state.tau_upper[k] - state.tau_lower[k]);
    r.stationarity = std::max(r.stationarity, stat.cwiseAbs().maxCoeff());

    const Vec over = state.primal[k] - problem.upper_bound;
    const Vec under = problem.lower_bound - state.primal[k];
    r.primal_feasibility = std::max(
        r.primal_feasibility,
        std::max(over.maxCoeff(), under.maxCoeff()));
    r.dual_feasibility = std::max(
        r.dual_feasibility,
        std::max(-state.tau_upper[k].minCoeff(), -state.tau_lower[k].minCoeff()));
    r.complementary_slackness = std::max(
        r.complementary_slackness,
        std::max(state.tau_upper[k].cwiseProduct(over).cwiseAbs().maxCoeff(),
                 state.tau_lower[k].cwiseProduct(under).cwiseAbs().maxCoeff()));
  }
  const Vec slack = flows.cwiseProduct(flows) -
                    problem.edge_limits.cwiseProduct(problem.edge_limits);
  if (slack.size() > 0) {
    r.primal_feasibility = std::max(r.primal_feasibility, slack.maxCoeff());
    r.dual_feasibility = std::max(r.dual_feasibility, -state.lambda.minCoeff());
    r.complementary_slackness =
        std::max(r.complementary_slackness,
                 state.lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  r.primal_feasibility = std::max(r.primal_feasibility, 0.0);
  r.dual_feasibility = std::max(r.dual_feasibility, 0.0);
  return r;
}

LinearFlowModel rps_linearize(const PowerNetwork& network, const Vec& admittance_prev,
                              const Vec& base_injection, const SmoothingParams& params) {
  if (params.hard_threshold)
    throw std::invalid_argument(
        "RPS linearization needs the smooth survival rule (finite sigma)");
  const Vec thresholds = network.flow_thresholds();
  const Vec flows_prev =
      solve_flow(network, admittance_prev, base_injection).branch_flows;
  const Vec g = survival_factors(flows_prev, thresholds, params);

  LinearFlowModel model;
  model.expansion_admittance = g.cwiseProduct(admittance_prev);
  model.coeff_curr = flow_jacobian_injections(network, model.expansion_admittance);

  // chain rule: d(flow_m)/dP^{m-1} = d(flow_m)/dY_m . (g' o Y_prev) . d(flow_prev)/dP
  const Vec gp = survival_derivatives(flows_prev, thresholds, params);
  const Vec chain = gp.cwiseProduct(admittance_prev);
  const Mat d_adm =
      flow_jacobian_admittance(network, model.expansion_admittance, base_injection)
          .d_flow_d_admittance;
  const Mat jac_prev = flow_jacobian_injections(network, admittance_prev);
  model.coeff_prev = d_adm * chain.asDiagonal() * jac_prev;

  model.expansion_flows =
      solve_flow(network, model.expansion_admittance, base_injection).branch_flows;
  model.constant = model.expansion_flows - model.coeff_curr * base_injection;
  return model;
}

double objective_value(const SheddingProblem& problem, const std::vector<Vec>& primal) {
  double value = 0.0;
  for (const Vec& p : primal) {
    const Vec diff = problem.weights.cwiseProduct(p - problem.base_injection);
    value += diff.squaredNorm();
  }
  return value;
}

}  // namespace gridshed
