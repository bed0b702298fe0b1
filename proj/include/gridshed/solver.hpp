#ifndef GRIDSHED_SOLVER_HPP
#define GRIDSHED_SOLVER_HPP

#include <vector>

#include "gridshed/cascade.hpp"
#include "gridshed/netmodel.hpp"
#include "gridshed/powerflow.hpp"

namespace gridshed {

class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { NPS, RPS };

/// Linear model of the step-m branch flows around the expansion point
/// (P^{m-1}, P^m) = (P0, P0):
///   flow_hat = constant + coeff_prev (P^{m-1} - P0) + coeff_curr P^m
struct LinearFlowModel {
  Vec constant;    // n_b; zero up to roundoff by construction
  Mat coeff_prev;  // n_b x n
  Mat coeff_curr;  // n_b x n
  Vec expansion_flows;      // exact flows at the expansion point
  Vec expansion_admittance; // Y_p^m at P^{m-1} = P0

  Vec evaluate(const Vec& p_prev, const Vec& p_curr, const Vec& p0) const {
    return constant + coeff_prev * (p_prev - p0) + coeff_curr * p_curr;
  }
};

/// One frozen load-shedding optimization instance.
struct SheddingProblem {
  Scheme variant = Scheme::NPS;
  const PowerNetwork* network = nullptr;
  Vec frozen_admittance;  // Y_p^m for NPS, Y_p^{m-1} for RPS
  Vec base_injection;
  Vec weights;
  Vec lower_bound;
  Vec upper_bound;
  Vec flow_limits;                  // per branch
  std::vector<int> constrained_edges;  // branches alive at the constrained step

  // NPS: rows of the flow Jacobian at frozen_admittance (all branches).
  Mat flow_jacobian;
  // RPS: linearized two-step flow model about (P0, P0).
  LinearFlowModel model;

  // Rows restricted to constrained_edges, in that order. edge_rows_prev is
  // empty for NPS.
  Mat edge_rows_curr;
  Mat edge_rows_prev;
  Vec edge_limits;

  int primal_blocks() const { return variant == Scheme::NPS ? 1 : 2; }
  /// Constrained-edge flows as a function of the primal blocks.
  Vec constraint_flows(const std::vector<Vec>& primal) const;
};

/// Primal variables plus multipliers of the saddle-point dynamics.
struct SaddleState {
  std::vector<Vec> primal;    // {P} for NPS, {P^{m-1}, P^m} for RPS
  Vec lambda;                 // per constrained edge, >= 0
  std::vector<Vec> tau_upper; // per primal block, per bus, >= 0
  std::vector<Vec> tau_lower;
  double time = 0.0;

  Vec flatten() const;
  static SaddleState like(const SaddleState& shape);
  double max_abs_difference(const SaddleState& other) const;
  bool all_finite() const;
};

struct SolverConfig {
  double dt = 0.1;
  double horizon = 10.0;
  double convergence_tol = 1e-6;
  double kkt_tol = 1e-4;
};

struct IntegrationResult {
  SaddleState solution;
  std::vector<SaddleState> trajectory;  // sampled every Euler step
  bool converged = false;
};

struct KktResidual {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementary_slackness = 0.0;
  double max() const;
};

/// Freezes Y_p^m from an unprotected trajectory and assembles Problem data.
SheddingProblem build_nps_problem(const PowerNetwork& network,
                                  const CascadeTrajectory& cascade, int m);

SheddingProblem build_rps_problem(const PowerNetwork& network,
                                  const CascadeTrajectory& cascade, int m,
                                  const SmoothingParams& smoothing);

double nps_lagrangian(const SaddleState& state, const SheddingProblem& problem);
double rps_lagrangian(const SaddleState& state, const SheddingProblem& problem);

/// The projection [x]^+_y of the dual dynamics: x if y > 0, max(x,0) at y = 0.
double projection(double x, double y);

SaddleState nps_rhs(const SaddleState& state, const SheddingProblem& problem);
SaddleState rps_rhs(const SaddleState& state, const SheddingProblem& problem);
SaddleState saddle_rhs(const SaddleState& state, const SheddingProblem& problem);

SaddleState initial_state(const SheddingProblem& problem);

IntegrationResult integrate(const SheddingProblem& problem, const SolverConfig& config);

KktResidual kkt_residual(const SaddleState& state, const SheddingProblem& problem);

/// Builds the linearized two-step flow model about (P0, P0) at Y_p^{m-1}.
LinearFlowModel rps_linearize(const PowerNetwork& network, const Vec& admittance_prev,
                              const Vec& base_injection, const SmoothingParams& params);

double objective_value(const SheddingProblem& problem, const std::vector<Vec>& primal);

}  // namespace gridshed

#endif
