#include "purc/flow_recovery.hpp"

#include <cmath>
#include <limits>

#include "purc/dual_solver.hpp"
#include "purc/numeric.hpp"

namespace purc {

FlowSolution recover_flow(const Problem& problem, const Eigen::VectorXd& u_hat,
                          double grad_tol) {
  Eigen::VectorXd grad = dual_gradient(problem, u_hat);
  double gn = grad.size() == 0 ? 0.0 : grad.cwiseAbs().maxCoeff();
  if (gn > grad_tol) {
    throw ConvergenceError("potential is not optimal: dual gradient norm " + std::to_string(gn) +
                           " exceeds " + std::to_string(grad_tol));
  }
  FlowSolution sol;
  sol.potential = u_hat;
  sol.flow.resize(problem.link_count());
  for (Index e = 0; e < problem.link_count(); ++e) {
    sol.flow[e] =
        problem.perturbation(e).grad_conj(problem.tension(u_hat, e) - problem.costs()[e]);
  }
  sol.grad_norm = gn;
  sol.conservation_residual = gn;  // the dual gradient is b - A x
  sol.primal_value = primal_value(problem, sol.flow);
  sol.dual_value = dual_objective(problem, u_hat);
  sol.active_set = support(sol.flow);
  return sol;
}

double primal_value(const Problem& problem, const Eigen::VectorXd& x) {
  if (x.size() != problem.link_count()) throw ParseError("flow has wrong dimension");
  for (Index e = 0; e < x.size(); ++e) {
    if (x[e] < 0.0) return std::numeric_limits<double>::infinity();
  }
  KahanSum sum;
  for (Index e = 0; e < x.size(); ++e) {
    sum.add(problem.costs()[e] * x[e]);
    sum.add(problem.perturbation(e).eval(x[e]));
  }
  return sum.value();
}

std::vector<Index> support(const Eigen::VectorXd& x, double eps_supp) {
  std::vector<Index> active;
  for (Index e = 0; e < x.size(); ++e) {
    if (x[e] > eps_supp) active.push_back(e);
  }
  return active;
}

double duality_gap(const Problem& problem, const FlowSolution& solution) {
  (void)problem;
  return solution.primal_value - solution.dual_value;
}

}  // namespace purc
