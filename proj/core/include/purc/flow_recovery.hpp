#pragma once

#include <Eigen/Dense>

#include <vector>

#include "purc/problem.hpp"

namespace purc {

inline constexpr double kDefaultSupportEps = 1e-8;

struct FlowSolution {
  Eigen::VectorXd flow;       // x >= 0, link order
  Eigen::VectorXd potential;  // reduced potential the flow was recovered from
  double primal_value = 0.0;
  double dual_value = 0.0;
  std::vector<Index> active_set;
  double conservation_residual = 0.0;  // max norm of A x - b
  double grad_norm = 0.0;              // dual gradient norm at the potential
};

/// Link-by-link recovery x_e = grad h_e*(<a_e, u> - c_e) from an optimal
/// potential, plus primal/dual values and the active set. Rejects potentials
/// whose dual gradient exceeds `grad_tol` (recovering from a non-optimal
/// potential would silently produce a wrong flow). No projection or repair
/// is applied to the recovered flow; the conservation residual is reported
/// as-is.
FlowSolution recover_flow(const Problem& problem, const Eigen::VectorXd& u_hat,
                          double grad_tol = 1e-6);

/// <c, x> + sum_e h_e(x_e), compensated summation; +infinity if any x_e < 0.
double primal_value(const Problem& problem, const Eigen::VectorXd& x);

/// Links with x_e > eps_supp.
std::vector<Index> support(const Eigen::VectorXd& x, double eps_supp = kDefaultSupportEps);

/// p - p*; vanishes at an optimum.
double duality_gap(const Problem& problem, const FlowSolution& solution);

}  // namespace purc
