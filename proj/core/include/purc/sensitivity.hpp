#pragma once

#include <Eigen/Dense>

#include <vector>

#include "purc/dual_solver.hpp"
#include "purc/flow_recovery.hpp"
#include "purc/problem.hpp"

namespace purc {

/// Active/inactive split of the links at a solved instance, with the dense
/// restriction of the reduced incidence matrix to active columns and the
/// primal curvature diagonal D on the active links.
struct ActivePartition {
  std::vector<Index> active;
  std::vector<Index> inactive;
  Eigen::MatrixXd incidence_active;  // (|V|-1) x |active|
  Eigen::VectorXd curvature_active;  // diag of hess h_e at the active flows
};

/// Throws CurvatureUndefinedError if an active flow sits on a primal kink,
/// where the Jacobian genuinely does not exist.
ActivePartition active_partition(const Problem& problem, const FlowSolution& solution,
                                 double eps_supp = kDefaultSupportEps);

/// Margins proxying membership in the generic cost set: every inactive link
/// must be clearly below activation and every active flow clearly positive.
struct GenericityReport {
  double min_inactive_margin = 0.0;  // min over inactive of c_e - tension_e
  double min_active_flow = 0.0;
  double threshold = 0.0;
  bool ok = false;
};

GenericityReport genericity_check(const Problem& problem, const FlowSolution& solution,
                                  double threshold = 1e-6);

enum class JacobianMethod { Nullspace, Laplacian, ReducedLaplacian };
enum class NullspaceMethod { Svd, Qr };

std::string to_string(JacobianMethod m);

struct JacobianResult {
  Eigen::MatrixXd full;          // |E| x |E|, original link order
  Eigen::MatrixXd active_block;  // |active| x |active|
  std::vector<Index> active;
  JacobianMethod method = JacobianMethod::Nullspace;
  Index nullspace_dim = 0;
};

/// Orthonormal kernel basis of `m`, by SVD (singular values below
/// rel_tol * sigma_max count as zero) or by rank-revealing QR of the
/// transpose. Empty matrix when the kernel is trivial.
Eigen::MatrixXd nullspace_basis(const Eigen::MatrixXd& m,
                                NullspaceMethod method = NullspaceMethod::Svd,
                                double rel_tol = 1e-10);

/// Active block -N (N^T D N)^{-1} N^T over a kernel basis N of the active
/// incidence, zero when the kernel is trivial; inactive rows and columns are
/// zero. All three jacobian_* routines run the genericity guard first.
JacobianResult jacobian_nullspace(const Problem& problem, const FlowSolution& solution);

/// Active block -[D^{-1} - D^{-1} A^T L+ A D^{-1}] with the inverse-curvature
/// weighted Laplacian L = A D^{-1} A^T pseudoinverted.
JacobianResult jacobian_laplacian(const Problem& problem, const FlowSolution& solution);

/// Laplacian form restricted to nodes incident to active links, solved with
/// a plain inverse. Single origin-destination demand only; throws
/// SingularSystemError when part of the active subgraph is a circulation
/// with no connection to the destination (possible under negative costs),
/// where this form does not exist.
JacobianResult jacobian_reduced(const Problem& problem, const FlowSolution& solution);

/// dx = (jacobian at the solution) * dc, computed without materializing the
/// Jacobian: per-link curvature response, a Laplacian potential adjustment
/// (minimum-norm), then the feasibility correction. Large instances use
/// conjugate gradients with the known Laplacian kernel deflated.
Eigen::VectorXd directional_flow_response(const Problem& problem, const FlowSolution& solution,
                                          const Eigen::VectorXd& dc);

/// Central-difference Jacobian by re-solving with per-link cost bumps.
/// Aborts with SupportChangeError when a probe changes the active set (the
/// base point is then not generic and the comparison meaningless).
Eigen::MatrixXd finite_difference_jacobian(const Problem& problem, double step = 1e-5,
                                           const SolverConfig& solver_config = {});

}  // namespace purc
