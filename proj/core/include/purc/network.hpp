#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "purc/errors.hpp"

namespace purc {

using Index = Eigen::Index;

/// One directed link of the input description, endpoints by node id.
struct Link {
  std::string id;
  std::string from;
  std::string to;
};

/// Directed multigraph with stable node and link orderings.
///
/// Node ids are arbitrary strings mapped to dense indices in first-appearance
/// order over the link list, so matrix rows and columns are reproducible for
/// a given input. Parallel links are allowed; self-loops are rejected.
class Network {
 public:
  struct LinkRef {
    std::string id;
    Index tail;  // initial node v(e)
    Index head;  // terminal node v'(e)
  };

  explicit Network(const std::vector<Link>& links);

  Index node_count() const { return static_cast<Index>(node_ids_.size()); }
  Index link_count() const { return static_cast<Index>(links_.size()); }

  const std::vector<std::string>& node_ids() const { return node_ids_; }
  const std::vector<LinkRef>& links() const { return links_; }
  const LinkRef& link(Index e) const { return links_[static_cast<size_t>(e)]; }
  const std::string& node_id(Index v) const { return node_ids_[static_cast<size_t>(v)]; }

  Index node_index(const std::string& id) const;       // throws ParseError
  Index link_index(const std::string& id) const;       // throws ParseError
  bool has_node(const std::string& id) const { return node_of_.count(id) > 0; }

  /// Outgoing link indices per node, in link order.
  const std::vector<std::vector<Index>>& out_links() const { return out_links_; }
  const std::vector<std::vector<Index>>& in_links() const { return in_links_; }

 private:
  std::vector<std::string> node_ids_;
  std::vector<LinkRef> links_;
  std::unordered_map<std::string, Index> node_of_;
  std::unordered_map<std::string, Index> link_of_;
  std::vector<std::vector<Index>> out_links_;
  std::vector<std::vector<Index>> in_links_;
};

/// Node-link incidence matrix: -1 at a link's initial node, +1 at its
/// terminal node, 0 elsewhere. Stored sparse (triplet-built); a dense copy is
/// kept for small networks so desk-scale work avoids sparse overhead.
class Incidence {
 public:
  explicit Incidence(const Network& net);

  const Eigen::SparseMatrix<double>& full() const { return full_; }
  Eigen::MatrixXd full_dense() const;
  Eigen::VectorXd column(Index e) const;

  Index rows() const { return full_.rows(); }
  Index cols() const { return full_.cols(); }

 private:
  Eigen::SparseMatrix<double> full_;
  std::optional<Eigen::MatrixXd> dense_;  // populated below the dense cutoff
};

inline Incidence build_incidence(const Network& net) { return Incidence(net); }

/// Travel demand: either a unit origin-destination trip or a general
/// balanced vector over all nodes. The grounded node (whose row is dropped
/// from the incidence matrix and whose potential is normalized to zero) is
/// the destination in single-OD mode and an explicit reference otherwise.
class Demand {
 public:
  static Demand single_od(const Network& net, const std::string& origin,
                          const std::string& destination);
  /// `b_full` must sum to zero; `reference` defaults to the first node with
  /// positive demand.
  static Demand balanced(const Network& net, Eigen::VectorXd b_full,
                         std::optional<Index> reference = std::nullopt);

  bool is_single_od() const { return origin_.has_value(); }
  Index origin() const;       // single-OD only
  Index destination() const { return destination_; }

  const Eigen::VectorXd& full_vector() const { return b_full_; }
  Eigen::VectorXd reduced_vector() const;

 private:
  Demand() = default;
  std::optional<Index> origin_;
  Index destination_ = 0;
  Eigen::VectorXd b_full_;
};

struct ReducedSystem {
  Eigen::SparseMatrix<double> matrix;  // A, destination row dropped
  Eigen::VectorXd demand;              // b, destination entry dropped
  Index dropped_row = 0;
};

/// Drops the grounded node's row from the incidence matrix and the matching
/// entry from the demand vector.
ReducedSystem reduce(const Incidence& incidence, const Demand& demand);

bool is_strongly_connected(const Network& net);

/// First ordered node pair (from, to) with no positive path, if any.
std::optional<std::pair<std::string, std::string>> find_unreachable_pair(const Network& net);

/// Integer link-traversal counts of one positive origin-destination path
/// (fewest hops, deterministic tie-breaking by link order). Satisfies the
/// reduced conservation equations exactly and is nonnegative, which makes it
/// a feasibility witness and a warm-start flow.
Eigen::VectorXd positive_path_flow(const Network& net, Index origin, Index destination);

}  // namespace purc
