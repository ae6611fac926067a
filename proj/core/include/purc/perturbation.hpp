#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "purc/errors.hpp"

namespace purc {

/// A second derivative together with an existence flag. Where the derivative
/// does not exist (a kink), `value` carries the average of the two one-sided
/// second derivatives, which is the substitute the damped Newton step uses.
struct Curvature {
  double value = 0.0;
  bool defined = true;
};

/// Univariate convex link perturbation h with effective domain [0, inf),
/// strictly convex there and superlinear, plus its conjugate pair.
///
/// `conj` is finite on all of R and `grad_conj` is its nondecreasing,
/// continuous derivative with range inside [0, inf); it is the single-valued
/// inverse of the subdifferential of h, which is what makes link-by-link
/// flow recovery from tensions possible. Implementations must satisfy
/// conj(eta) == grad_conj(eta) * eta - eval(grad_conj(eta)) for every eta.
///
/// All evaluations are pure; instances are immutable and freely shared.
class LinkPerturbation {
 public:
  virtual ~LinkPerturbation() = default;

  /// h(xi); +infinity for xi < 0.
  virtual double eval(double xi) const = 0;
  /// h*(eta).
  virtual double conj(double eta) const = 0;
  /// d/deta h*(eta).
  virtual double grad_conj(double eta) const = 0;
  /// d^2/deta^2 h*(eta); see Curvature for kink behavior.
  virtual Curvature hess_conj(double eta) const = 0;
  /// d^2/dxi^2 h(xi) for xi > 0; undefined at primal kinks.
  virtual Curvature hess_primal(double xi) const = 0;

  /// One-sided derivatives of h at xi >= 0. At xi == 0 the lower end is
  /// -infinity (domain boundary); for the entropy family the upper end is
  /// -infinity there too, since its subdifferential at zero is empty.
  virtual double grad_primal_lower(double xi) const = 0;
  virtual double grad_primal_upper(double xi) const = 0;

  /// Strong-convexity modulus mu with h'' >= mu, when one exists.
  virtual std::optional<double> strong_convexity_modulus() const { return std::nullopt; }
  /// Dual points where hess_conj is undefined.
  virtual std::vector<double> kink_points() const { return {}; }
  /// Primal points where h itself has a kink.
  virtual std::vector<double> primal_kink_points() const { return {}; }

  virtual std::string name() const = 0;
};

using PerturbationPtr = std::shared_ptr<const LinkPerturbation>;

/// h(xi) = xi^2 / 2. Conjugate max(0, eta)^2 / 2; 1-strongly convex.
PerturbationPtr quadratic();
/// h(xi) = xi ln xi (0 at 0). Conjugate exp(eta - 1); forces positive flow.
PerturbationPtr entropy();
/// h(xi) = (1 + xi) ln(1 + xi) - xi. Conjugate exp(eta) - eta - 1 for
/// eta >= 0 and 0 below.
PerturbationPtr entropy_like();
/// Two quadratic pieces joined with a derivative jump at xi = 1; the
/// conjugate gradient is flat at 1 on [1, 3/2]. 1-strongly convex.
PerturbationPtr piecewise_quadratic();
/// beta * h(xi / gamma) with the conjugate beta * h*(gamma eta / beta).
PerturbationPtr scaled(PerturbationPtr base, double beta, double gamma);

/// Family name plus scale parameters, as read from network files.
struct PerturbationSpec {
  std::string family = "quadratic";
  double beta = 1.0;   // param1
  double gamma = 1.0;  // param2
};

/// Builds a family by name ("quadratic", "entropy", "entropy_like",
/// "piecewise_quadratic"), wrapped in the scaling transform when beta or
/// gamma differ from 1. Throws ParseError for unknown names or nonpositive
/// scale parameters.
PerturbationPtr make_perturbation(const std::string& family, double beta = 1.0,
                                  double gamma = 1.0);
PerturbationPtr make_perturbation(const PerturbationSpec& spec);

struct ValidationIssue {
  std::string check;
  double point = 0.0;
  double detail = 0.0;
};

/// Outcome of the numerical audit in `validate`. `issues` is empty when the
/// perturbation behaves like a Condition-2 family on the sampled grids.
struct ValidationReport {
  std::vector<ValidationIssue> issues;
  double max_conjugacy_residual = 0.0;
  bool monotone = true;
  bool superlinear = true;
  bool range_nonnegative = true;
  bool conj_finite = true;
  bool ok() const { return issues.empty(); }
};

/// Numerically audits a (possibly user-supplied) perturbation: conjugacy
/// identity residuals on the dual grid, monotonicity and nonnegativity of
/// grad_conj, finiteness of conj, and the superlinear growth trend of
/// eval(xi)/xi on the primal grid. Collects violations; never throws for a
/// failed check.
ValidationReport validate(const LinkPerturbation& p, const std::vector<double>& dual_grid,
                          const std::vector<double>& primal_grid, double tol = 1e-10);

/// Audit on default grids: 201 dual points on [-10, 10] and 120 log-spaced
/// primal points in (0, 1e4].
ValidationReport validate(const LinkPerturbation& p, double tol = 1e-10);

}  // namespace purc
