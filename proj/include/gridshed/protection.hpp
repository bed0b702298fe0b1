#ifndef GRIDSHED_PROTECTION_HPP
#define GRIDSHED_PROTECTION_HPP

#include <map>
#include <optional>
#include <vector>

#include "gridshed/cascade.hpp"
#include "gridshed/netmodel.hpp"
#include "gridshed/solver.hpp"

namespace gridshed {

struct DisturbanceEvent {
  Vec delta;  // Y_p^1 - Y_p^0
  int detected_at_step = 1;
  std::vector<int> severed_branches;  // 1-based branch ids zeroed by delta
};

/// Compares the observed admittance against the reference network.
/// Returns nullopt when nothing changed (no protection episode needed).
std::optional<DisturbanceEvent> identify_disturbance(const PowerNetwork& reference,
                                                     const Vec& observed_admittance);

struct SheddingPlan {
  std::map<int, Vec> per_step;  // cascading step -> injections to enforce
  Scheme scheme = Scheme::NPS;
  bool fallback_used = false;
};

struct FlowViolation {
  int branch_id = 0;  // 1-based
  double flow_magnitude = 0.0;
  double limit = 0.0;
};

struct FlowCheck {
  bool ok = true;
  std::vector<FlowViolation> violations;
};

/// Exact flow solve followed by |flow| <= limit + 1e-6 on every live branch.
FlowCheck verify_flows(const PowerNetwork& network, const Vec& admittance,
                       const Vec& injections, const Vec& limits);

struct ProtectionOutcome {
  SheddingPlan plan;
  double objective = 0.0;
  CascadeMetrics final_metrics;
  bool verified = false;
  CascadeTrajectory trajectory;       // protected cascade, steps 1..end
  IntegrationResult solver_result;    // saddle-point trajectory for export
  SheddingProblem problem;            // the instance that produced the plan
};

ProtectionOutcome run_nps(const PowerNetwork& network, const DisturbanceEvent& event,
                          int m, const SolverConfig& solver_config,
                          const SmoothingParams& smoothing);

ProtectionOutcome run_rps(const PowerNetwork& network, const DisturbanceEvent& event,
                          int m, const SolverConfig& solver_config,
                          const SmoothingParams& smoothing);

}  // namespace gridshed

#endif
