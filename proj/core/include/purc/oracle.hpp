#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "purc/problem.hpp"

namespace purc {

/// Result of the exhaustive primal search. `multipliers` are the certifying
/// node potentials recovered from the stationarity conditions of the winning
/// support's equality-constrained subproblem.
struct BruteForceResult {
  Eigen::VectorXd flow;
  double primal_value = 0.0;
  std::vector<Index> active_set;
  Eigen::VectorXd multipliers;
  bool certified = false;
  int supports_examined = 0;
  int candidates = 0;
};

/// Ground-truth primal solver, independent of the dual pipeline: enumerates
/// every support pattern (hence the 16-link bound), solves the smooth
/// equality-constrained subproblem on each via Newton in a nullspace
/// parameterization with the other links pinned to zero, keeps nonnegative
/// candidates whose multipliers pass the sign conditions, and returns the
/// feasible minimum.
BruteForceResult brute_force_primal(const Problem& problem);

/// Closed-form optimum of the two-node, two-link entropy network. The
/// potential is the origin's, with the destination grounded at zero, so it
/// compares directly against solver output.
struct TwoLinkSolution {
  double potential = 0.0;
  Eigen::Vector2d flow;
  Eigen::Matrix2d jacobian;
  double discriminant = 0.0;
};

TwoLinkSolution two_link_closed_form(double c1, double c2);

/// The matching solvable instance: links e1: v1 -> v2 and e2: v2 -> v1 with
/// entropy perturbations, unit demand v1 -> v2, costs (c1, c2).
Problem two_link_problem(double c1, double c2);

/// Linear resistive-circuit solve: (A R^{-1} A^T) u = b, x = R^{-1} A^T u,
/// with the destination grounded. Currents may be negative; this is the
/// full-domain quadratic model, not a Condition-2 perturbation.
struct CircuitSolution {
  Eigen::VectorXd potential;
  Eigen::VectorXd flow;
};

CircuitSolution circuit_solve(const Network& net, const Eigen::VectorXd& resistances,
                              const Demand& demand);

/// Deterministic random instances for verification and property suites:
/// strongly connected by construction (a spanning cycle plus random extra
/// links), mixed perturbation families, uniform costs.
struct RandomProblemConfig {
  int min_nodes = 4;
  int max_nodes = 10;
  int min_links = 6;
  int max_links = 16;
  double cost_lo = -1.0;
  double cost_hi = 3.0;
  std::vector<std::string> families = {"quadratic", "entropy", "entropy_like",
                                       "piecewise_quadratic"};
};

Problem random_problem(std::uint64_t seed, const RandomProblemConfig& config = {});

}  // namespace purc
