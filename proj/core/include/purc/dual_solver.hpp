#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "purc/problem.hpp"

namespace purc {

enum class SolveMethod { GradientAscent, DampedNewton, Auto };

std::string to_string(SolveMethod m);

struct SolverConfig {
  SolveMethod method = SolveMethod::Auto;
  /// Convergence threshold on the infinity norm of the dual gradient, i.e.
  /// the worst conservation violation at any node.
  double grad_tol = 1e-10;
  int max_iter_gradient = 100000;
  int max_iter_newton = 200;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  /// Initial ridge added to the negated Hessian; escalated by 10x until the
  /// factorization succeeds and the step is an ascent direction.
  double newton_regularization = 1e-10;
  /// When set, gradient ascent takes plain fixed steps of this size instead
  /// of an Armijo search.
  std::optional<double> fixed_step;
  /// Starting potential; zero by default.
  std::optional<Eigen::VectorXd> initial_potential;
  bool record_trace = false;
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  char kind = 'G';  // 'G' gradient, 'N' Newton, 'F' gradient fallback
};

struct DualReport {
  Eigen::VectorXd u_hat;
  double dual_value = 0.0;
  int iterations = 0;
  double final_grad_norm = 0.0;
  SolveMethod method_used = SolveMethod::Auto;
  bool converged = false;
  int hessian_fallbacks = 0;
  std::vector<IterationRecord> trace;
};

/// g(u) = <b, u> - sum_e h_e*(<a_e, u> - c_e). Concave and finite on all of
/// the reduced potential space.
double dual_objective(const Problem& problem, const Eigen::VectorXd& u);

/// grad g(u) = b - A grad H*(A^T u - c): the excess demand each node sees
/// under the flows induced by u.
Eigen::VectorXd dual_gradient(const Problem& problem, const Eigen::VectorXd& u);

struct DualHessian {
  Eigen::MatrixXd matrix;  // negative semidefinite
  /// Links whose tension sat exactly on a conjugate kink; their curvature
  /// entries used the averaged one-sided values.
  std::vector<Index> kink_links;
};

/// Hessian of g where it exists: -A diag(hess h_e*(tension - c)) A^T.
DualHessian dual_hessian(const Problem& problem, const Eigen::VectorXd& u);

/// Ascent on g along the gradient from u = 0: Armijo backtracking from step
/// 1, or plain fixed steps when configured.
DualReport solve_gradient_ascent(const Problem& problem, const SolverConfig& config = {});

/// Damped Newton: solve (-hess g + lambda I) du = grad g, Armijo search
/// along du. Falls back to a gradient step (recorded) when no usable Newton
/// direction exists.
DualReport solve_newton(const Problem& problem, const SolverConfig& config = {});

/// Dispatch on config.method; Auto runs Newton and falls back to gradient
/// ascent from the last iterate if Newton stalls.
DualReport solve_dual(const Problem& problem, const SolverConfig& config = {});

}  // namespace purc
