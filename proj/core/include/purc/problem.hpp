#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <vector>

#include "purc/network.hpp"
#include "purc/perturbation.hpp"

namespace purc {

/// A traveler's problem instance: network, per-link perturbations, link
/// costs, and demand. Construction checks strong connectivity once (all the
/// duality results assume it) and caches the incidence matrices and the
/// reduced system with the grounded node's row dropped.
///
/// Immutable after construction; safe to share across concurrent solves.
struct ProblemOptions {
  /// Expert escape hatch for degenerate fixtures (e.g. a single-link chain,
  /// where conservation pins the flow without a return path).
  bool check_connectivity = true;
};

class Problem {
 public:
  using Options = ProblemOptions;

  Problem(Network net, std::vector<PerturbationPtr> perturbations, Eigen::VectorXd costs,
          Demand demand, Options options = Options());

  const Network& network() const { return net_; }
  const Incidence& incidence() const { return incidence_; }
  const Demand& demand() const { return demand_; }
  const Eigen::VectorXd& costs() const { return costs_; }

  /// Reduced incidence matrix A (grounded row dropped).
  const Eigen::SparseMatrix<double>& reduced_incidence() const { return reduced_.matrix; }
  /// Reduced demand b.
  const Eigen::VectorXd& reduced_demand() const { return reduced_.demand; }

  Index node_count() const { return net_.node_count(); }
  Index link_count() const { return net_.link_count(); }
  Index reduced_dim() const { return net_.node_count() - 1; }

  const LinkPerturbation& perturbation(Index e) const {
    return *perturbations_[static_cast<size_t>(e)];
  }
  const std::vector<PerturbationPtr>& perturbations() const { return perturbations_; }

  /// Reduced row index of a link's tail/head node, or -1 for the grounded node.
  Index tail_row(Index e) const { return tail_row_[static_cast<size_t>(e)]; }
  Index head_row(Index e) const { return head_row_[static_cast<size_t>(e)]; }

  /// Tension across link e under potential u (grounded potential is 0).
  double tension(const Eigen::VectorXd& u, Index e) const {
    Index t = tail_row(e), h = head_row(e);
    double s = 0.0;
    if (h >= 0) s += u[h];
    if (t >= 0) s -= u[t];
    return s;
  }
  Eigen::VectorXd tensions(const Eigen::VectorXd& u) const;

  /// Family/parameter description per link when the problem came from a
  /// file; programmatically built problems may not have one.
  const std::optional<std::vector<PerturbationSpec>>& perturbation_specs() const {
    return specs_;
  }
  void set_perturbation_specs(std::vector<PerturbationSpec> specs);

 private:
  Network net_;
  std::vector<PerturbationPtr> perturbations_;
  Eigen::VectorXd costs_;
  Demand demand_;
  Incidence incidence_;
  ReducedSystem reduced_;
  std::vector<Index> tail_row_;
  std::vector<Index> head_row_;
  std::optional<std::vector<PerturbationSpec>> specs_;
};

/// Same problem with a different cost vector (network, perturbations and
/// demand shared). The sensitivity oracles re-solve through this.
Problem with_costs(const Problem& base, Eigen::VectorXd costs);

}  // namespace purc
