#ifndef GRIDSHED_POWERFLOW_HPP
#define GRIDSHED_POWERFLOW_HPP

#include <vector>

#include "gridshed/netmodel.hpp"

namespace gridshed {

/// Solved DC power flow state at a fixed admittance vector.
struct FlowSolution {
  Vec angles;          // bus voltage angles, radians
  Vec branch_flows;    // per-branch, positive from -> to
  Mat laplacian_pinv;  // cached pseudoinverse of A^T diag(Y) A
  std::vector<int> component;       // bus -> connected-component index
  std::vector<double> component_imbalance;  // per component, sum of injections
};

Mat laplacian(const PowerNetwork& network, const Vec& admittance);

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix, via symmetric
/// eigendecomposition. Eigenvalues below 1e-9 * lambda_max count as null.
Mat generalized_inverse(const Mat& laplacian_matrix);

FlowSolution solve_flow(const PowerNetwork& network, const Vec& admittance,
                        const Vec& injections);

/// d(branch flow)/d(injection), n_b x n. Flows are affine in P at fixed Y:
/// flow(P) = J * P exactly.
Mat flow_jacobian_injections(const PowerNetwork& network, const Vec& admittance);

struct AdmittanceJacobian {
  Mat d_flow_d_admittance;  // n_b x n_b
  /// Columns where the derivative is one-sided because raising that branch
  /// admittance from zero would rejoin separate components.
  std::vector<int> nonsmooth_columns;
};

/// d(branch flow)/d(admittance) at fixed injections, valid at constant
/// Laplacian rank.
AdmittanceJacobian flow_jacobian_admittance(const PowerNetwork& network,
                                            const Vec& admittance,
                                            const Vec& injections);

/// Connected components of the subgraph with admittance > 0.
std::vector<int> connected_components(const PowerNetwork& network,
                                      const Vec& admittance);

}  // namespace gridshed

#endif
