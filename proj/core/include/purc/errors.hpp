#pragma once

#include <stdexcept>
#include <string>

namespace purc {

/// Malformed input file or inconsistent problem description.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The network violates the strong-connectivity requirement.
class ConnectivityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solve ran out of iterations before reaching tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A perturbation function failed its numerical audit.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dual tension left the representable range of an exponential conjugate.
/// Feasible solves never get here; hitting it indicates a malformed problem.
class DivergingDualError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The solution sits too close to an activation boundary for the Jacobian
/// formulas to be trustworthy.
class GenericityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An active flow sits at a kink of its primal perturbation, so the local
/// curvature needed by the Jacobian does not exist.
class CurvatureUndefinedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A finite-difference probe changed the active set, so the comparison point
/// is not generic and the oracle abstains.
class SupportChangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The reduced Laplacian is structurally singular: part of the active
/// subgraph is a circulation with no connection to the grounded node, which
/// negative link costs can sustain. The kernel-basis and pseudoinverse
/// Jacobian forms still apply.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace purc
