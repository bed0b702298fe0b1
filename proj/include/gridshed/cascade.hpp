#ifndef GRIDSHED_CASCADE_HPP
#define GRIDSHED_CASCADE_HPP

#include <vector>

#include "gridshed/netmodel.hpp"
#include "gridshed/powerflow.hpp"

namespace gridshed {

/// Parameters of the smooth branch-survival rule. hard_threshold selects the
/// step-function limit (survive iff |flow| <= c).
struct SmoothingParams {
  double sigma_smooth = 1e3;
  bool hard_threshold = false;
};

struct CascadeState {
  int step = 0;     // cascading step index, 1-based
  Vec admittance;   // Y_p^k
  Vec flows;        // branch flows at this step
  Vec injections;   // bus injections in force at this step
};

struct CascadeTrajectory {
  std::vector<CascadeState> states;  // steps 1..terminated_at
  int terminated_at = 0;
  bool quiescent = false;

  const CascadeState& state_at(int step) const;
  /// Admittance in force at the given step; steps past quiescence return the
  /// final admittance (it no longer changes).
  Vec admittance_at(int step) const;
};

struct CascadeMetrics {
  int n_connected = 0;    // branches with admittance > 1e-9
  int n_active = 0;       // branches with |flow| > 1e-6
  double total_power = 0.0;  // sum of |flow| over branches
  double shed_power = 0.0;   // sum of |P0_i - P_i|
};

constexpr double kQuiescenceTol = 1e-9;
constexpr double kConnectedTol = 1e-9;
constexpr double kActiveFlowTol = 1e-6;

double survival_factor(double flow, double threshold, const SmoothingParams& params);

/// dg/d(flow); zero outside the transition band. Not defined in
/// hard-threshold mode.
double survival_derivative(double flow, double threshold, const SmoothingParams& params);

Vec survival_factors(const Vec& flows, const Vec& thresholds,
                     const SmoothingParams& params);
Vec survival_derivatives(const Vec& flows, const Vec& thresholds,
                         const SmoothingParams& params);

CascadeState cascade_step(const PowerNetwork& network, const CascadeState& state,
                          const Vec& injections, const SmoothingParams& params);

/// Iterates the cascade from Y_p^1 until the admittance stops changing
/// (max|dY| <= 1e-9) or max_steps.
CascadeTrajectory simulate(const PowerNetwork& network, const Vec& initial_admittance,
                           const Vec& injections, const SmoothingParams& params,
                           int max_steps = 50);

CascadeMetrics metrics(const PowerNetwork& network, const CascadeState& state);

}  // namespace gridshed

#endif
