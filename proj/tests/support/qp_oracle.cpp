#include "support/qp_oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gridshed::testing {

namespace {

struct Reduced {
  BoxQp qp;                 // only free variables
  std::vector<int> free_idx;
  Vec fixed_full;           // full-length vector with fixed entries set
  int n_full = 0;
};

// Variables with a zero-width box are constants; eliminate them so the
// barrier always has a strict interior.
Reduced reduce(const BoxQp& qp) {
  Reduced r;
  r.n_full = static_cast<int>(qp.p0.size());
  r.fixed_full = Vec::Zero(r.n_full);
  for (int i = 0; i < r.n_full; ++i) {
    if (qp.upper[i] - qp.lower[i] < 1e-12)
      r.fixed_full[i] = qp.lower[i];
    else
      r.free_idx.push_back(i);
  }
  const int nf = static_cast<int>(r.free_idx.size());
  r.qp.rows.resize(qp.rows.rows(), nf);
  r.qp.lower.resize(nf);
  r.qp.upper.resize(nf);
  r.qp.weights.resize(nf);
  r.qp.p0.resize(nf);
  for (int j = 0; j < nf; ++j) {
    const int i = r.free_idx[j];
    r.qp.rows.col(j) = qp.rows.col(i);
    r.qp.lower[j] = qp.lower[i];
    r.qp.upper[j] = qp.upper[i];
    r.qp.weights[j] = qp.weights[i];
    r.qp.p0[j] = qp.p0[i];
  }
  Vec base = qp.offset.size() ? qp.offset : Vec::Zero(qp.rows.rows());
  r.qp.offset = base + qp.rows * r.fixed_full;
  r.qp.limits = qp.limits;
  return r;
}

double barrier_value(const BoxQp& qp, const Vec& p, double mu, bool& feasible) {
  feasible = true;
  const Vec diff = qp.weights.cwiseProduct(p - qp.p0);
  double v = diff.squaredNorm();
  const Vec f = qp.rows * p + qp.offset;
  for (int l = 0; l < f.size(); ++l) {
    const double s = qp.limits[l] * qp.limits[l] - f[l] * f[l];
    if (s <= 0) { feasible = false; return std::numeric_limits<double>::infinity(); }
    v -= mu * std::log(s);
  }
  for (int i = 0; i < p.size(); ++i) {
    const double hi = qp.upper[i] - p[i], lo = p[i] - qp.lower[i];
    if (hi <= 0 || lo <= 0) { feasible = false; return std::numeric_limits<double>::infinity(); }
    v -= mu * (std::log(hi) + std::log(lo));
  }
  return v;
}

// One centering problem: Newton with backtracking on the barrier objective.
bool center(const BoxQp& qp, Vec& p, double mu) {
  const int n = static_cast<int>(p.size());
  for (int iter = 0; iter < 80; ++iter) {
    const Vec f = qp.rows * p + qp.offset;
    Vec grad = 2.0 * qp.weights.cwiseProduct(qp.weights)
                        .cwiseProduct(p - qp.p0);
    Mat hess = Mat::Zero(n, n);
    hess.diagonal() = 2.0 * qp.weights.cwiseProduct(qp.weights);
    for (int l = 0; l < f.size(); ++l) {
      const double s = qp.limits[l] * qp.limits[l] - f[l] * f[l];
      grad += mu * (2.0 * f[l] / s) * qp.rows.row(l).transpose();
      hess += mu * (2.0 / s + 4.0 * f[l] * f[l] / (s * s)) *
              (qp.rows.row(l).transpose() * qp.rows.row(l));
    }
    for (int i = 0; i < n; ++i) {
      const double hi = qp.upper[i] - p[i], lo = p[i] - qp.lower[i];
      grad[i] += mu * (1.0 / hi - 1.0 / lo);
      hess(i, i) += mu * (1.0 / (hi * hi) + 1.0 / (lo * lo));
    }
    Eigen::LDLT<Mat> ldlt(hess);
    const Vec step = ldlt.solve(-grad);
    const double decrement = -grad.dot(step);
    if (!(decrement > 1e-14)) return true;
    bool feasible = false;
    const double v0 = barrier_value(qp, p, mu, feasible);
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Vec cand = p + t * step;
      bool cand_ok = false;
      const double v = barrier_value(qp, cand, mu, cand_ok);
      if (cand_ok && v <= v0 - 1e-4 * t * decrement) { p = cand; break; }
      if (ls == 59) return true;  // stalled; accept current center
    }
  }
  return true;
}

// Phase 1: find a point with strict flow feasibility by relaxing the flow
// constraints with a shared slack and descending in it.
bool phase_one(const BoxQp& qp, Vec& p) {
  // strict box interior
  for (int i = 0; i < p.size(); ++i) {
    const double w = qp.upper[i] - qp.lower[i];
    p[i] = std::min(std::max(p[i], qp.lower[i] + 0.05 * w), qp.upper[i] - 0.05 * w);
  }
  auto max_violation = [&](const Vec& x) {
    const Vec f = qp.rows * x + qp.offset;
    double worst = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < f.size(); ++l)
      worst = std::max(worst, f[l] * f[l] - qp.limits[l] * qp.limits[l]);
    return worst;
  };
  if (max_violation(p) < 0) return true;

  const int n = static_cast<int>(p.size());
  double s = max_violation(p) + 1.0;
  for (double mu = 1.0; mu > 1e-9; mu *= 0.2) {
    for (int iter = 0; iter < 60; ++iter) {
      const Vec f = qp.rows * p + qp.offset;
      Vec grad = Vec::Zero(n + 1);
      Mat hess = Mat::Zero(n + 1, n + 1);
      grad[n] = 1.0;
      for (int l = 0; l < f.size(); ++l) {
        const double gap = s + qp.limits[l] * qp.limits[l] - f[l] * f[l];
        Vec row = Vec::Zero(n + 1);
        row.head(n) = -2.0 * f[l] * qp.rows.row(l).transpose();
        row[n] = 1.0;
        grad -= (mu / gap) * row;
        hess += (mu / (gap * gap)) * (row * row.transpose());
        Mat d2 = Mat::Zero(n + 1, n + 1);
        d2.topLeftCorner(n, n) =
            -2.0 * (qp.rows.row(l).transpose() * qp.rows.row(l));
        hess -= (mu / gap) * d2;
      }
      for (int i = 0; i < n; ++i) {
        const double hi = qp.upper[i] - p[i], lo = p[i] - qp.lower[i];
        grad[i] += mu * (1.0 / hi - 1.0 / lo);
        hess(i, i) += mu * (1.0 / (hi * hi) + 1.0 / (lo * lo));
      }
      hess.diagonal().array() += 1e-12;
      const Vec step = Eigen::LDLT<Mat>(hess).solve(-grad);
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Vec pc = p + t * step.head(n);
        const double sc = s + t * step[n];
        bool in_box = true;
        for (int i = 0; i < n; ++i)
          if (pc[i] <= qp.lower[i] || pc[i] >= qp.upper[i]) { in_box = false; break; }
        if (!in_box) continue;
        const Vec fc = qp.rows * pc + qp.offset;
        bool gaps_ok = true;
        for (int l = 0; l < fc.size(); ++l)
          if (sc + qp.limits[l] * qp.limits[l] - fc[l] * fc[l] <= 0) {
            gaps_ok = false;
            break;
          }
        if (gaps_ok) { p = pc; s = sc; break; }
      }
      if (max_violation(p) < -1e-10) return true;
      if (step.head(n).cwiseAbs().maxCoeff() < 1e-14) break;
    }
    if (max_violation(p) < -1e-10) return true;
  }
  return max_violation(p) < 0;
}

}  // namespace

QpSolution solve_box_qp(const BoxQp& qp, double mu_final) {
  Reduced red = reduce(qp);
  QpSolution sol;
  const int nf = static_cast<int>(red.free_idx.size());
  Vec p = red.qp.p0;
  if (nf > 0 && !phase_one(red.qp, p)) return sol;  // ok = false: infeasible

  double mu = 1.0;
  while (true) {
    if (nf > 0 && !center(red.qp, p, mu)) return sol;
    if (mu <= mu_final) break;
    mu = std::max(mu * 0.15, mu_final);
  }

  sol.ok = true;
  sol.p = red.fixed_full;
  for (int j = 0; j < nf; ++j) sol.p[red.free_idx[j]] = p[j];
  const Vec f = red.qp.rows * p + red.qp.offset;
  sol.lambda.resize(f.size());
  for (int l = 0; l < f.size(); ++l)
    sol.lambda[l] = mu / (red.qp.limits[l] * red.qp.limits[l] - f[l] * f[l]);
  sol.tau_upper = Vec::Zero(red.n_full);
  sol.tau_lower = Vec::Zero(red.n_full);
  for (int j = 0; j < nf; ++j) {
    const int i = red.free_idx[j];
    sol.tau_upper[i] = mu / (red.qp.upper[j] - p[j]);
    sol.tau_lower[i] = mu / (p[j] - red.qp.lower[j]);
  }
  // For eliminated (zero-width) variables pick the stationarity-balancing
  // split; complementarity holds automatically since p sits on both bounds.
  if (nf < red.n_full) {
    const Vec f_full = qp.rows * sol.p + (qp.offset.size() ? qp.offset
                                                          : Vec::Zero(qp.rows.rows()));
    for (int i = 0; i < red.n_full; ++i) {
      if (qp.upper[i] - qp.lower[i] >= 1e-12) continue;
      double g = 2.0 * qp.weights[i] * qp.weights[i] * (sol.p[i] - qp.p0[i]);
      for (int l = 0; l < f_full.size(); ++l)
        g += 2.0 * sol.lambda[l] * f_full[l] * qp.rows(l, i);
      sol.tau_upper[i] = std::max(-g, 0.0);
      sol.tau_lower[i] = std::max(g, 0.0);
    }
  }
  const Vec diff = qp.weights.cwiseProduct(sol.p - qp.p0);
  sol.value = diff.squaredNorm();
  return sol;
}

Mat oracle_flow_rows(const Mat& incidence, const Vec& admittance) {
  const Mat laplacian =
      incidence.transpose() * admittance.asDiagonal() * incidence;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(laplacian);
  cod.setThreshold(1e-9);
  const Mat pinv = cod.pseudoInverse();
  return admittance.asDiagonal() * incidence * pinv;
}

}  // namespace gridshed::testing
