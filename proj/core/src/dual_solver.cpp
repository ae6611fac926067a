#include "purc/dual_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>

#include "purc/numeric.hpp"

namespace purc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Above this reduced dimension the Newton system is assembled and factored
// sparse.
constexpr Index kSparseNewtonCutoff = 200;

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Objective value for line-search trial points: a diverging exponential
// conjugate just means the trial step went too far.
double objective_or_minus_inf(const Problem& problem, const Eigen::VectorXd& u) {
  try {
    return dual_objective(problem, u);
  } catch (const DivergingDualError&) {
    return -kInf;
  }
}

struct LineSearchResult {
  double step = 0.0;
  double objective = -kInf;
  bool accepted = false;
};

// Smallest objective improvement the line search can still observe; below
// this the Armijo comparison is pure rounding noise.
double fp_noise(double g0) {
  return 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(g0));
}

// Upper bound on the spectral norm of hess g from the curvature weights:
// sum of w_e * ||a_e||^2 over links.
double gradient_lipschitz_bound(const Problem& problem, const Eigen::VectorXd& w) {
  double bound = 0.0;
  for (Index e = 0; e < problem.link_count(); ++e) {
    if (w[e] == 0.0) continue;
    double nnz = (problem.tail_row(e) >= 0 ? 1.0 : 0.0) + (problem.head_row(e) >= 0 ? 1.0 : 0.0);
    bound += w[e] * nnz;
  }
  return bound;
}

LineSearchResult armijo_ascent(const Problem& problem, const Eigen::VectorXd& u, double g0,
                               const Eigen::VectorXd& direction, double slope,
                               const SolverConfig& config) {
  double alpha = 1.0;
  while (alpha > 1e-18) {
    double trial = objective_or_minus_inf(problem, u + alpha * direction);
    if (trial >= g0 + config.armijo_c1 * alpha * slope) {
      return {alpha, trial, true};
    }
    alpha *= config.backtrack;
  }
  return {};
}

void check_config(const SolverConfig& config) {
  if (!(config.grad_tol > 0.0)) throw ParseError("grad_tol must be strictly positive");
  if (!(config.newton_regularization > 0.0)) {
    throw ParseError("newton_regularization must be strictly positive");
  }
  if (!(config.armijo_c1 > 0.0 && config.armijo_c1 < 1.0)) {
    throw ParseError("armijo_c1 must lie in (0, 1)");
  }
  if (!(config.backtrack > 0.0 && config.backtrack < 1.0)) {
    throw ParseError("backtrack factor must lie in (0, 1)");
  }
  if (config.fixed_step && !(*config.fixed_step > 0.0)) {
    throw ParseError("fixed_step must be strictly positive");
  }
}

Eigen::VectorXd starting_point(const Problem& problem, const SolverConfig& config) {
  if (config.initial_potential) {
    if (config.initial_potential->size() != problem.reduced_dim()) {
      throw ParseError("initial potential has wrong dimension");
    }
    return *config.initial_potential;
  }
  return Eigen::VectorXd::Zero(problem.reduced_dim());
}

// Curvature weights w_e = hess h_e*(tension_e - c_e), averaged one-sided
// values at kinks.
Eigen::VectorXd curvature_weights(const Problem& problem, const Eigen::VectorXd& u,
                                  std::vector<Index>* kink_links) {
  Eigen::VectorXd w(problem.link_count());
  for (Index e = 0; e < problem.link_count(); ++e) {
    Curvature c = problem.perturbation(e).hess_conj(problem.tension(u, e) - problem.costs()[e]);
    w[e] = c.value;
    if (!c.defined && kink_links) kink_links->push_back(e);
  }
  return w;
}

// Newton direction via dense Cholesky with escalating ridge.
bool newton_direction_dense(const Problem& problem, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& grad, double lambda0,
                            Eigen::VectorXd* direction) {
  const Index n = problem.reduced_dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index e = 0; e < problem.link_count(); ++e) {
    double we = w[e];
    if (we == 0.0) continue;
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0) m(t, t) += we;
    if (h >= 0) m(h, h) += we;
    if (t >= 0 && h >= 0) {
      m(t, h) -= we;
      m(h, t) -= we;
    }
  }
  double lambda = lambda0;
  const double lambda_cap = 1e12 * std::max(1.0, m.diagonal().maxCoeff());
  Eigen::MatrixXd ridged;
  while (lambda <= lambda_cap) {
    ridged = m;
    ridged.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(ridged);
    if (llt.info() == Eigen::Success) {
      *direction = llt.solve(grad);
      if (direction->dot(grad) > 0.0 && direction->allFinite()) return true;
    }
    lambda *= 10.0;
  }
  return false;
}

bool newton_direction_sparse(const Problem& problem, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& grad, double lambda0,
                             Eigen::VectorXd* direction) {
  const Index n = problem.reduced_dim();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(4 * problem.link_count() + n));
  for (Index e = 0; e < problem.link_count(); ++e) {
    double we = w[e];
    if (we == 0.0) continue;
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0) trip.emplace_back(t, t, we);
    if (h >= 0) trip.emplace_back(h, h, we);
    if (t >= 0 && h >= 0) {
      trip.emplace_back(t, h, -we);
      trip.emplace_back(h, t, -we);
    }
  }
  double lambda = lambda0;
  const double lambda_cap = 1e14;
  while (lambda <= lambda_cap) {
    std::vector<Eigen::Triplet<double>> all = trip;
    for (Index i = 0; i < n; ++i) all.emplace_back(i, i, lambda);
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(all.begin(), all.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
    if (ldlt.info() == Eigen::Success) {
      *direction = ldlt.solve(grad);
      if (direction->dot(grad) > 0.0 && direction->allFinite()) return true;
    }
    lambda *= 10.0;
  }
  return false;
}

void record(std::vector<IterationRecord>* trace, const SolverConfig& config, int iter, double g,
            double gn, double step, char kind) {
  if (config.record_trace) trace->push_back({iter, g, gn, step, kind});
}

}  // namespace

std::string to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::GradientAscent:
      return "gradient_ascent";
    case SolveMethod::DampedNewton:
      return "damped_newton";
    case SolveMethod::Auto:
      return "auto";
  }
  return "unknown";
}

double dual_objective(const Problem& problem, const Eigen::VectorXd& u) {
  if (u.size() != problem.reduced_dim()) throw ParseError("potential has wrong dimension");
  KahanSum conj_sum;
  for (Index e = 0; e < problem.link_count(); ++e) {
    conj_sum.add(problem.perturbation(e).conj(problem.tension(u, e) - problem.costs()[e]));
  }
  return problem.reduced_demand().dot(u) - conj_sum.value();
}

Eigen::VectorXd dual_gradient(const Problem& problem, const Eigen::VectorXd& u) {
  if (u.size() != problem.reduced_dim()) throw ParseError("potential has wrong dimension");
  Eigen::VectorXd grad = problem.reduced_demand();
  for (Index e = 0; e < problem.link_count(); ++e) {
    double x = problem.perturbation(e).grad_conj(problem.tension(u, e) - problem.costs()[e]);
    if (x == 0.0) continue;
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0) grad[t] += x;
    if (h >= 0) grad[h] -= x;
  }
  return grad;
}

DualHessian dual_hessian(const Problem& problem, const Eigen::VectorXd& u) {
  if (u.size() != problem.reduced_dim()) throw ParseError("potential has wrong dimension");
  DualHessian result;
  Eigen::VectorXd w = curvature_weights(problem, u, &result.kink_links);
  const Index n = problem.reduced_dim();
  result.matrix = Eigen::MatrixXd::Zero(n, n);
  for (Index e = 0; e < problem.link_count(); ++e) {
    double we = w[e];
    if (we == 0.0) continue;
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0) result.matrix(t, t) -= we;
    if (h >= 0) result.matrix(h, h) -= we;
    if (t >= 0 && h >= 0) {
      result.matrix(t, h) += we;
      result.matrix(h, t) += we;
    }
  }
  return result;
}

DualReport solve_gradient_ascent(const Problem& problem, const SolverConfig& config) {
  check_config(config);
  DualReport report;
  report.method_used = SolveMethod::GradientAscent;
  Eigen::VectorXd u = starting_point(problem, config);
  for (int iter = 0; iter <= config.max_iter_gradient; ++iter) {
    Eigen::VectorXd grad = dual_gradient(problem, u);
    double gn = inf_norm(grad);
    if (gn <= config.grad_tol) {
      report.converged = true;
      report.iterations = iter;
      report.final_grad_norm = gn;
      break;
    }
    if (iter == config.max_iter_gradient) {
      report.iterations = iter;
      report.final_grad_norm = gn;
      break;
    }
    if (config.fixed_step) {
      u += *config.fixed_step * grad;
      record(&report.trace, config, iter, 0.0, gn, *config.fixed_step, 'G');
      continue;
    }
    double g0 = dual_objective(problem, u);
    double slope = grad.squaredNorm();
    if (slope < fp_noise(g0)) {
      // The remaining ascent is no longer measurable in the objective.
      // Curvature-bounded steps still contract the gradient toward the
      // tolerance; the half keeps the step inside the contraction range
      // even where kink averaging halves a one-sided curvature.
      Eigen::VectorXd w = curvature_weights(problem, u, nullptr);
      double lip = gradient_lipschitz_bound(problem, w);
      u += 0.5 / std::max(lip, 1e-12) * grad;
      record(&report.trace, config, iter, g0, gn, 0.5 / std::max(lip, 1e-12), 'S');
      continue;
    }
    LineSearchResult ls = armijo_ascent(problem, u, g0, grad, slope, config);
    if (!ls.accepted) {
      report.iterations = iter;
      report.final_grad_norm = gn;
      break;  // step collapsed; leave converged=false
    }
    u += ls.step * grad;
    record(&report.trace, config, iter, ls.objective, gn, ls.step, 'G');
  }
  report.u_hat = std::move(u);
  report.dual_value = dual_objective(problem, report.u_hat);
  return report;
}

DualReport solve_newton(const Problem& problem, const SolverConfig& config) {
  check_config(config);
  DualReport report;
  report.method_used = SolveMethod::DampedNewton;
  const bool sparse = problem.reduced_dim() > kSparseNewtonCutoff;
  Eigen::VectorXd u = starting_point(problem, config);
  for (int iter = 0; iter <= config.max_iter_newton; ++iter) {
    Eigen::VectorXd grad = dual_gradient(problem, u);
    double gn = inf_norm(grad);
    if (gn <= config.grad_tol) {
      report.converged = true;
      report.iterations = iter;
      report.final_grad_norm = gn;
      break;
    }
    if (iter == config.max_iter_newton) {
      report.iterations = iter;
      report.final_grad_norm = gn;
      break;
    }
    Eigen::VectorXd w = curvature_weights(problem, u, nullptr);
    Eigen::VectorXd direction;
    char kind = 'N';
    bool have_direction =
        sparse ? newton_direction_sparse(problem, w, grad, config.newton_regularization, &direction)
               : newton_direction_dense(problem, w, grad, config.newton_regularization, &direction);
    if (!have_direction) {
      direction = grad;  // singular system: plain ascent step
      kind = 'F';
      ++report.hessian_fallbacks;
    }
    double g0 = dual_objective(problem, u);
    double slope = direction.dot(grad);
    if (slope < fp_noise(g0)) {
      // Predicted improvement is below objective resolution; the damped
      // Newton step itself still contracts the gradient, so take it.
      u += direction;
      record(&report.trace, config, iter, g0, gn, 1.0, kind);
      continue;
    }
    LineSearchResult ls = armijo_ascent(problem, u, g0, direction, slope, config);
    if (!ls.accepted) {
      report.iterations = iter;
      report.final_grad_norm = gn;
      break;
    }
    u += ls.step * direction;
    record(&report.trace, config, iter, ls.objective, gn, ls.step, kind);
  }
  report.u_hat = std::move(u);
  report.dual_value = dual_objective(problem, report.u_hat);
  return report;
}

DualReport solve_dual(const Problem& problem, const SolverConfig& config) {
  switch (config.method) {
    case SolveMethod::GradientAscent:
      return solve_gradient_ascent(problem, config);
    case SolveMethod::DampedNewton:
      return solve_newton(problem, config);
    case SolveMethod::Auto:
      break;
  }
  DualReport report = solve_newton(problem, config);
  if (report.converged) return report;
  SolverConfig retry = config;
  retry.initial_potential = report.u_hat;
  DualReport second = solve_gradient_ascent(problem, retry);
  second.iterations += report.iterations;
  second.hessian_fallbacks = report.hessian_fallbacks;
  return second;
}

}  // namespace purc
