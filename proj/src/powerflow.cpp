#include "gridshed/powerflow.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>

namespace gridshed {

namespace {
constexpr double kEigenCutoffRel = 1e-9;
constexpr double kSymmetryTol = 1e-10;
}  // namespace

Mat laplacian(const PowerNetwork& network, const Vec& admittance) {
  if (admittance.size() != network.branch_count())
    throw ValidationError("admittance vector length mismatch");
  const Mat& A = network.incidence();
  return A.transpose() * admittance.asDiagonal() * A;
}

Mat generalized_inverse(const Mat& laplacian_matrix) {
  const Mat& B = laplacian_matrix;
  if (B.rows() != B.cols()) throw ValidationError("pseudoinverse needs a square matrix");
  const double scale = B.cwiseAbs().maxCoeff();
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * std::max(1.0, scale))
    throw ValidationError("pseudoinverse input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(B);
  const Vec& vals = eig.eigenvalues();
  const Mat& vecs = eig.eigenvectors();
  const double cutoff = kEigenCutoffRel * std::max(vals.cwiseAbs().maxCoeff(), 0.0);
  Vec inv = Vec::Zero(vals.size());
  for (int i = 0; i < vals.size(); ++i)
    if (vals[i] > cutoff) inv[i] = 1.0 / vals[i];
  return vecs * inv.asDiagonal() * vecs.transpose();
}

std::vector<int> connected_components(const PowerNetwork& network, const Vec& admittance) {
  const int n = network.bus_count();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> adjacency(n);
  for (int l = 0; l < network.branch_count(); ++l) {
    if (admittance[l] > 0.0) {
      adjacency[network.branch(l).from_bus].push_back(network.branch(l).to_bus);
      adjacency[network.branch(l).to_bus].push_back(network.branch(l).from_bus);
    }
  }
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adjacency[u])
        if (comp[v] < 0) {
          comp[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  return comp;
}

FlowSolution solve_flow(const PowerNetwork& network, const Vec& admittance,
                        const Vec& injections) {
  if (injections.size() != network.bus_count())
    throw ValidationError("injection vector length mismatch");
  if (admittance.minCoeff() < 0.0)
    throw ValidationError("admittance must be nonnegative");

  FlowSolution sol;
  sol.laplacian_pinv = generalized_inverse(laplacian(network, admittance));
  sol.angles = sol.laplacian_pinv * injections;
  sol.component = connected_components(network, admittance);

  const int ncomp = 1 + *std::max_element(sol.component.begin(), sol.component.end());
  sol.component_imbalance.assign(ncomp, 0.0);
  for (int i = 0; i < network.bus_count(); ++i)
    sol.component_imbalance[sol.component[i]] += injections[i];

  sol.branch_flows = Vec::Zero(network.branch_count());
  for (int l = 0; l < network.branch_count(); ++l) {
    if (admittance[l] == 0.0) continue;  // dead branches carry exactly zero
    const Branch& br = network.branch(l);
    sol.branch_flows[l] =
        admittance[l] * (sol.angles[br.from_bus] - sol.angles[br.to_bus]);
  }
  return sol;
}

Mat flow_jacobian_injections(const PowerNetwork& network, const Vec& admittance) {
  const Mat pinv = generalized_inverse(laplacian(network, admittance));
  return admittance.asDiagonal() * network.incidence() * pinv;
}

AdmittanceJacobian flow_jacobian_admittance(const PowerNetwork& network,
                                            const Vec& admittance,
                                            const Vec& injections) {
  // flow_l = Y_l a_l^T B^+ P with B = A^T diag(Y) A and a_l the l-th incidence
  // row. dB/dY_q = a_q a_q^T and, at constant rank, dB^+/dY_q = -B^+ a_q a_q^T B^+,
  // so d(flow_l)/dY_q = delta_lq (a_l^T theta) - Y_l (a_l^T B^+ a_q)(a_q^T theta).
  const Mat& A = network.incidence();
  const Mat pinv = generalized_inverse(laplacian(network, admittance));
  const Vec theta = pinv * injections;
  const Vec branch_angle_diff = A * theta;         // a_q^T theta per branch
  const Mat transfer = A * pinv * A.transpose();   // a_l^T B^+ a_q

  const int nb = network.branch_count();
  AdmittanceJacobian out;
  out.d_flow_d_admittance =
      -(admittance.asDiagonal() * transfer) * branch_angle_diff.asDiagonal();
  out.d_flow_d_admittance += Mat(branch_angle_diff.asDiagonal());

  // A zero-admittance branch whose endpoints sit in different components has
  // no two-sided derivative: raising its admittance changes the rank of B.
  const auto comp = connected_components(network, admittance);
  for (int q = 0; q < nb; ++q) {
    if (admittance[q] == 0.0 &&
        comp[network.branch(q).from_bus] != comp[network.branch(q).to_bus])
      out.nonsmooth_columns.push_back(q);
  }
  return out;
}

}  // namespace gridshed
