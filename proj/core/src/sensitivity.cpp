#include "purc/sensitivity.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

namespace purc {

namespace {

// Above this reduced dimension the minimum-norm Laplacian solve switches
// from a dense eigendecomposition to deflated conjugate gradients.
constexpr Index kDenseLaplacianCutoff = 512;

Eigen::MatrixXd scatter_full(const Eigen::MatrixXd& block, const std::vector<Index>& active,
                             Index link_count) {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(link_count, link_count);
  for (size_t i = 0; i < active.size(); ++i) {
    for (size_t j = 0; j < active.size(); ++j) {
      full(active[i], active[j]) = block(static_cast<Index>(i), static_cast<Index>(j));
    }
  }
  return full;
}

// Orthonormal kernel vectors of the active Laplacian: indicators of
// active-subgraph components that never touch the grounded node, including
// reduced nodes isolated from every active link.
std::vector<Eigen::VectorXd> laplacian_kernel(const Problem& problem,
                                              const std::vector<Index>& active) {
  const Index n = problem.reduced_dim();
  std::vector<Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  std::function<Index(Index)> find = [&](Index v) -> Index {
    while (parent[static_cast<size_t>(v)] != v) {
      parent[static_cast<size_t>(v)] = parent[static_cast<size_t>(parent[static_cast<size_t>(v)])];
      v = parent[static_cast<size_t>(v)];
    }
    return v;
  };
  std::vector<bool> grounded(static_cast<size_t>(n), false);
  for (Index e : active) {
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0 && h >= 0) {
      parent[static_cast<size_t>(find(t))] = find(h);
    } else if (t >= 0) {
      grounded[static_cast<size_t>(t)] = true;
    } else if (h >= 0) {
      grounded[static_cast<size_t>(h)] = true;
    }
  }
  std::vector<bool> root_grounded(static_cast<size_t>(n), false);
  for (Index v = 0; v < n; ++v) {
    if (grounded[static_cast<size_t>(v)]) root_grounded[static_cast<size_t>(find(v))] = true;
  }
  std::vector<std::vector<Index>> members(static_cast<size_t>(n));
  for (Index v = 0; v < n; ++v) members[static_cast<size_t>(find(v))].push_back(v);
  std::vector<Eigen::VectorXd> kernel;
  for (Index r = 0; r < n; ++r) {
    const auto& comp = members[static_cast<size_t>(r)];
    if (comp.empty() || root_grounded[static_cast<size_t>(r)]) continue;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    double w = 1.0 / std::sqrt(static_cast<double>(comp.size()));
    for (Index v : comp) q[v] = w;
    kernel.push_back(std::move(q));
  }
  return kernel;
}

void deflate(Eigen::VectorXd& v, const std::vector<Eigen::VectorXd>& kernel) {
  for (const auto& q : kernel) v -= q.dot(v) * q;
}

// True when some active-subgraph component carries active links but never
// touches the grounded node. Nodes isolated from every active link are fine:
// they simply drop out of the reduced system.
bool has_detached_active_component(const Problem& problem, const std::vector<Index>& active) {
  const Index n = problem.reduced_dim();
  std::vector<Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  std::function<Index(Index)> find = [&](Index v) -> Index {
    while (parent[static_cast<size_t>(v)] != v) {
      parent[static_cast<size_t>(v)] = parent[static_cast<size_t>(parent[static_cast<size_t>(v)])];
      v = parent[static_cast<size_t>(v)];
    }
    return v;
  };
  std::vector<bool> grounded(static_cast<size_t>(n), false);
  std::vector<bool> touched(static_cast<size_t>(n), false);
  for (Index e : active) {
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0) touched[static_cast<size_t>(t)] = true;
    if (h >= 0) touched[static_cast<size_t>(h)] = true;
    if (t >= 0 && h >= 0) {
      parent[static_cast<size_t>(find(t))] = find(h);
    } else if (t >= 0) {
      grounded[static_cast<size_t>(t)] = true;
    } else if (h >= 0) {
      grounded[static_cast<size_t>(h)] = true;
    }
  }
  std::vector<bool> root_grounded(static_cast<size_t>(n), false);
  std::vector<bool> root_touched(static_cast<size_t>(n), false);
  for (Index v = 0; v < n; ++v) {
    Index r = find(v);
    if (grounded[static_cast<size_t>(v)]) root_grounded[static_cast<size_t>(r)] = true;
    if (touched[static_cast<size_t>(v)]) root_touched[static_cast<size_t>(r)] = true;
  }
  for (Index v = 0; v < n; ++v) {
    Index r = find(v);
    if (root_touched[static_cast<size_t>(r)] && !root_grounded[static_cast<size_t>(r)]) {
      return true;
    }
  }
  return false;
}

// Minimum-norm solution of L u = rhs for the symmetric PSD Laplacian
// L = A_active D^{-1} A_active^T, with rhs in range(L).
Eigen::VectorXd min_norm_laplacian_solve(const Problem& problem, const ActivePartition& part,
                                         const Eigen::VectorXd& rhs) {
  const Index n = problem.reduced_dim();
  const Eigen::VectorXd dinv = part.curvature_active.cwiseInverse();
  if (n <= kDenseLaplacianCutoff) {
    const Eigen::MatrixXd& a = part.incidence_active;
    Eigen::MatrixXd lap = a * dinv.asDiagonal() * a.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
    const Eigen::VectorXd& vals = es.eigenvalues();
    double cutoff = 1e-12 * std::max(1e-300, vals.cwiseAbs().maxCoeff());
    Eigen::VectorXd coeff = es.eigenvectors().transpose() * rhs;
    for (Index i = 0; i < n; ++i) {
      coeff[i] = vals[i] > cutoff ? coeff[i] / vals[i] : 0.0;
    }
    return es.eigenvectors() * coeff;
  }

  // CG on the operator u -> A D^{-1} A^T u, kernel components deflated so
  // roundoff cannot let the iterates drift out of range(L).
  auto kernel = laplacian_kernel(problem, part.active);
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd av = Eigen::VectorXd::Zero(n);
    for (size_t i = 0; i < part.active.size(); ++i) {
      Index e = part.active[i];
      Index t = problem.tail_row(e), h = problem.head_row(e);
      double tension = 0.0;
      if (h >= 0) tension += v[h];
      if (t >= 0) tension -= v[t];
      double w = dinv[static_cast<Index>(i)] * tension;
      if (h >= 0) av[h] += w;
      if (t >= 0) av[t] -= w;
    }
    return av;
  };
  Eigen::VectorXd b = rhs;
  deflate(b, kernel);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  double tol2 = std::pow(1e-14 * std::max(1.0, std::sqrt(rs)), 2);
  for (Index it = 0; it < 20 * n && rs > tol2; ++it) {
    Eigen::VectorXd ap = apply(p);
    deflate(ap, kernel);
    double alpha = rs / p.dot(ap);
    u += alpha * p;
    r -= alpha * ap;
    double rs_next = r.squaredNorm();
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  deflate(u, kernel);
  return u;
}

}  // namespace

std::string to_string(JacobianMethod m) {
  switch (m) {
    case JacobianMethod::Nullspace:
      return "nullspace";
    case JacobianMethod::Laplacian:
      return "laplacian";
    case JacobianMethod::ReducedLaplacian:
      return "reduced_laplacian";
  }
  return "unknown";
}

ActivePartition active_partition(const Problem& problem, const FlowSolution& solution,
                                 double eps_supp) {
  ActivePartition part;
  part.active = support(solution.flow, eps_supp);
  std::set<Index> active_set(part.active.begin(), part.active.end());
  for (Index e = 0; e < problem.link_count(); ++e) {
    if (!active_set.count(e)) part.inactive.push_back(e);
  }
  const Index n = problem.reduced_dim();
  part.incidence_active = Eigen::MatrixXd::Zero(n, static_cast<Index>(part.active.size()));
  part.curvature_active.resize(static_cast<Index>(part.active.size()));
  for (size_t i = 0; i < part.active.size(); ++i) {
    Index e = part.active[i];
    Index t = problem.tail_row(e), h = problem.head_row(e);
    if (t >= 0) part.incidence_active(t, static_cast<Index>(i)) = -1.0;
    if (h >= 0) part.incidence_active(h, static_cast<Index>(i)) = +1.0;
    for (double kink : problem.perturbation(e).primal_kink_points()) {
      if (std::abs(solution.flow[e] - kink) <= 1e-9 * std::max(1.0, std::abs(kink))) {
        throw CurvatureUndefinedError("active flow on link '" + problem.network().link(e).id +
                                      "' sits on a primal kink; the flow Jacobian does not exist");
      }
    }
    Curvature c = problem.perturbation(e).hess_primal(solution.flow[e]);
    if (!c.defined) {
      throw CurvatureUndefinedError("active flow on link '" + problem.network().link(e).id +
                                    "' sits on a primal kink; the flow Jacobian does not exist");
    }
    if (!(c.value > 0.0)) {
      throw CurvatureUndefinedError("nonpositive curvature on active link '" +
                                    problem.network().link(e).id + "'");
    }
    part.curvature_active[static_cast<Index>(i)] = c.value;
  }
  return part;
}

GenericityReport genericity_check(const Problem& problem, const FlowSolution& solution,
                                  double threshold) {
  GenericityReport rep;
  rep.threshold = threshold;
  std::set<Index> active_set(solution.active_set.begin(), solution.active_set.end());
  double min_margin = std::numeric_limits<double>::infinity();
  double min_flow = std::numeric_limits<double>::infinity();
  for (Index e = 0; e < problem.link_count(); ++e) {
    double tension = problem.tension(solution.potential, e);
    if (active_set.count(e)) {
      min_flow = std::min(min_flow, solution.flow[e]);
    } else {
      min_margin = std::min(min_margin, problem.costs()[e] - tension);
    }
  }
  rep.min_inactive_margin = min_margin;
  rep.min_active_flow = min_flow;
  rep.ok = min_margin > threshold && min_flow > threshold;
  return rep;
}

namespace {

void require_generic(const Problem& problem, const FlowSolution& solution) {
  GenericityReport rep = genericity_check(problem, solution);
  if (!rep.ok) {
    throw GenericityError(
        "solution fails the genericity guard: min inactive margin " +
        std::to_string(rep.min_inactive_margin) + ", min active flow " +
        std::to_string(rep.min_active_flow) + " (threshold " + std::to_string(rep.threshold) +
        ")");
  }
}

}  // namespace

Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& m, NullspaceMethod method,
                                double rel_tol) {
  const Index cols = m.cols();
  if (cols == 0) return Eigen::MatrixXd(0, 0);
  if (method == NullspaceMethod::Svd) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double smax = sv.size() > 0 ? sv[0] : 0.0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
      if (sv[i] > rel_tol * smax) ++rank;
    }
    return svd.matrixV().rightCols(cols - rank);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m.transpose());
  qr.setThreshold(rel_tol);
  Index rank = qr.rank();
  Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(cols - rank);
}

JacobianResult jacobian_nullspace(const Problem& problem, const FlowSolution& solution) {
  require_generic(problem, solution);
  ActivePartition part = active_partition(problem, solution);
  const Index na = static_cast<Index>(part.active.size());

  JacobianResult result;
  result.method = JacobianMethod::Nullspace;
  result.active = part.active;

  Eigen::MatrixXd basis = nullspace_basis(part.incidence_active);
  result.nullspace_dim = basis.cols();
  if (result.nullspace_dim == 0) {
    result.active_block = Eigen::MatrixXd::Zero(na, na);
  } else {
    Eigen::MatrixXd gram =
        basis.transpose() * part.curvature_active.asDiagonal() * basis;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    result.active_block = -basis * llt.solve(basis.transpose());
  }
  result.full = scatter_full(result.active_block, part.active, problem.link_count());
  return result;
}

JacobianResult jacobian_laplacian(const Problem& problem, const FlowSolution& solution) {
  require_generic(problem, solution);
  ActivePartition part = active_partition(problem, solution);
  const Index na = static_cast<Index>(part.active.size());
  const Index n = problem.reduced_dim();
  const Eigen::VectorXd dinv = part.curvature_active.cwiseInverse();
  const Eigen::MatrixXd& a = part.incidence_active;

  Eigen::MatrixXd lap = a * dinv.asDiagonal() * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  const Eigen::VectorXd& vals = es.eigenvalues();
  double cutoff = 1e-12 * std::max(1e-300, vals.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv_vals(n);
  Index rank = 0;
  for (Index i = 0; i < n; ++i) {
    if (vals[i] > cutoff) {
      inv_vals[i] = 1.0 / vals[i];
      ++rank;
    } else {
      inv_vals[i] = 0.0;
    }
  }
  Eigen::MatrixXd pinv = es.eigenvectors() * inv_vals.asDiagonal() * es.eigenvectors().transpose();

  JacobianResult result;
  result.method = JacobianMethod::Laplacian;
  result.active = part.active;
  result.nullspace_dim = na - rank;
  Eigen::MatrixXd adinv = a * dinv.asDiagonal();  // A D^{-1}
  result.active_block = -(Eigen::MatrixXd(dinv.asDiagonal()) - adinv.transpose() * pinv * adinv);
  result.full = scatter_full(result.active_block, part.active, problem.link_count());
  return result;
}

JacobianResult jacobian_reduced(const Problem& problem, const FlowSolution& solution) {
  if (!problem.demand().is_single_od()) {
    throw ParseError("reduced-Laplacian Jacobian requires single origin-destination demand");
  }
  require_generic(problem, solution);
  ActivePartition part = active_partition(problem, solution);

  // Invertibility needs every component of the active subgraph to reach the
  // grounded node. Negative costs can sustain optimal circulations that do
  // not, and there the plain inverse does not exist; the detection is exact
  // graph connectivity rather than a factorization failure.
  if (has_detached_active_component(problem, part.active)) {
    throw SingularSystemError(
        "reduced inverse-curvature Laplacian is singular: the active subgraph contains a "
        "circulation with no connection to the destination (possible under negative costs); "
        "use the nullspace or pseudoinverse-Laplacian form");
  }

  const Index na = static_cast<Index>(part.active.size());
  const Eigen::VectorXd dinv = part.curvature_active.cwiseInverse();

  // Nodes incident to at least one active link, in reduced row order.
  std::vector<bool> incident(static_cast<size_t>(problem.reduced_dim()), false);
  for (Index e : part.active) {
    if (problem.tail_row(e) >= 0) incident[static_cast<size_t>(problem.tail_row(e))] = true;
    if (problem.head_row(e) >= 0) incident[static_cast<size_t>(problem.head_row(e))] = true;
  }
  std::vector<Index> rows;
  for (Index v = 0; v < problem.reduced_dim(); ++v) {
    if (incident[static_cast<size_t>(v)]) rows.push_back(v);
  }
  const Index nr = static_cast<Index>(rows.size());
  Eigen::MatrixXd a_red(nr, na);
  for (Index i = 0; i < nr; ++i) a_red.row(i) = part.incidence_active.row(rows[static_cast<size_t>(i)]);

  Eigen::MatrixXd lap_red = a_red * dinv.asDiagonal() * a_red.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(lap_red);
  if (llt.info() != Eigen::Success) {
    throw SingularSystemError("reduced inverse-curvature Laplacian failed to factorize");
  }

  JacobianResult result;
  result.method = JacobianMethod::ReducedLaplacian;
  result.active = part.active;
  result.nullspace_dim = na - nr;
  Eigen::MatrixXd adinv = a_red * dinv.asDiagonal();
  result.active_block =
      -(Eigen::MatrixXd(dinv.asDiagonal()) - adinv.transpose() * llt.solve(adinv));
  result.full = scatter_full(result.active_block, part.active, problem.link_count());
  return result;
}

Eigen::VectorXd directional_flow_response(const Problem& problem, const FlowSolution& solution,
                                          const Eigen::VectorXd& dc) {
  if (dc.size() != problem.link_count()) throw ParseError("cost perturbation has wrong dimension");
  require_generic(problem, solution);
  ActivePartition part = active_partition(problem, solution);
  const Index na = static_cast<Index>(part.active.size());
  const Eigen::VectorXd dinv = part.curvature_active.cwiseInverse();

  Eigen::VectorXd dc_active(na);
  for (Index i = 0; i < na; ++i) dc_active[i] = dc[part.active[static_cast<size_t>(i)]];

  // Per-link curvature response, potential adjustment, feasibility correction.
  Eigen::VectorXd dx_tilde = -dinv.cwiseProduct(dc_active);
  Eigen::VectorXd rhs = part.incidence_active * dx_tilde;
  Eigen::VectorXd u = min_norm_laplacian_solve(problem, part, rhs);
  Eigen::VectorXd dx_active =
      dx_tilde - dinv.cwiseProduct(part.incidence_active.transpose() * u);

  Eigen::VectorXd dx = Eigen::VectorXd::Zero(problem.link_count());
  for (Index i = 0; i < na; ++i) dx[part.active[static_cast<size_t>(i)]] = dx_active[i];
  return dx;
}

Eigen::MatrixXd finite_difference_jacobian(const Problem& problem, double step,
                                           const SolverConfig& solver_config) {
  const Index m = problem.link_count();
  DualReport base = solve_dual(problem, solver_config);
  if (!base.converged) throw ConvergenceError("base solve did not converge");
  FlowSolution base_sol = recover_flow(problem, base.u_hat);

  auto solve_at = [&](const Eigen::VectorXd& costs) {
    Problem probe = with_costs(problem, costs);
    DualReport rep = solve_dual(probe, solver_config);
    if (!rep.converged) throw ConvergenceError("finite-difference probe did not converge");
    return recover_flow(probe, rep.u_hat);
  };

  Eigen::MatrixXd jac(m, m);
  for (Index e = 0; e < m; ++e) {
    Eigen::VectorXd up = problem.costs();
    Eigen::VectorXd dn = problem.costs();
    up[e] += step;
    dn[e] -= step;
    FlowSolution sol_up = solve_at(up);
    FlowSolution sol_dn = solve_at(dn);
    if (sol_up.active_set != base_sol.active_set || sol_dn.active_set != base_sol.active_set) {
      throw SupportChangeError("support changed under a +/-" + std::to_string(step) +
                               " bump of link '" + problem.network().link(e).id +
                               "'; cost point is not generic");
    }
    jac.col(e) = (sol_up.flow - sol_dn.flow) / (2.0 * step);
  }
  return jac;
}

}  // namespace purc
