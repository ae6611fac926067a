#include "purc/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace purc {

Network::Network(const std::vector<Link>& links) {
  if (links.empty()) {
    throw ParseError("network needs at least one link");
  }
  auto intern_node = [&](const std::string& id) -> Index {
    auto it = node_of_.find(id);
    if (it != node_of_.end()) return it->second;
    Index v = static_cast<Index>(node_ids_.size());
    node_ids_.push_back(id);
    node_of_.emplace(id, v);
    return v;
  };
  links_.reserve(links.size());
  for (const Link& l : links) {
    if (l.id.empty()) throw ParseError("link with empty id");
    if (l.from == l.to) {
      throw ParseError("self-loop on node '" + l.from + "' (link '" + l.id + "')");
    }
    if (link_of_.count(l.id)) throw ParseError("duplicate link id '" + l.id + "'");
    Index tail = intern_node(l.from);
    Index head = intern_node(l.to);
    link_of_.emplace(l.id, static_cast<Index>(links_.size()));
    links_.push_back(LinkRef{l.id, tail, head});
  }
  if (node_count() < 2) throw ParseError("network needs at least two nodes");

  out_links_.resize(static_cast<size_t>(node_count()));
  in_links_.resize(static_cast<size_t>(node_count()));
  for (Index e = 0; e < link_count(); ++e) {
    out_links_[static_cast<size_t>(links_[static_cast<size_t>(e)].tail)].push_back(e);
    in_links_[static_cast<size_t>(links_[static_cast<size_t>(e)].head)].push_back(e);
  }
}

Index Network::node_index(const std::string& id) const {
  auto it = node_of_.find(id);
  if (it == node_of_.end()) throw ParseError("unknown node id '" + id + "'");
  return it->second;
}

Index Network::link_index(const std::string& id) const {
  auto it = link_of_.find(id);
  if (it == link_of_.end()) throw ParseError("unknown link id '" + id + "'");
  return it->second;
}

namespace {
constexpr Index kDenseLinkCutoff = 64;
}

Incidence::Incidence(const Network& net) : full_(net.node_count(), net.link_count()) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(2 * net.link_count()));
  for (Index e = 0; e < net.link_count(); ++e) {
    const auto& l = net.link(e);
    trip.emplace_back(l.tail, e, -1.0);
    trip.emplace_back(l.head, e, +1.0);
  }
  full_.setFromTriplets(trip.begin(), trip.end());
  full_.makeCompressed();
  if (net.link_count() < kDenseLinkCutoff) {
    dense_ = Eigen::MatrixXd(full_);
  }
}

Eigen::MatrixXd Incidence::full_dense() const {
  if (dense_) return *dense_;
  return Eigen::MatrixXd(full_);
}

Eigen::VectorXd Incidence::column(Index e) const {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(full_.rows());
  for (Eigen::SparseMatrix<double>::InnerIterator it(full_, e); it; ++it) {
    a[it.row()] = it.value();
  }
  return a;
}

Demand Demand::single_od(const Network& net, const std::string& origin,
                         const std::string& destination) {
  Index o = net.node_index(origin);
  Index d = net.node_index(destination);
  if (o == d) throw ParseError("origin and destination must be distinct");
  Demand dm;
  dm.origin_ = o;
  dm.destination_ = d;
  dm.b_full_ = Eigen::VectorXd::Zero(net.node_count());
  dm.b_full_[o] = -1.0;
  dm.b_full_[d] = +1.0;
  return dm;
}

Demand Demand::balanced(const Network& net, Eigen::VectorXd b_full,
                        std::optional<Index> reference) {
  if (b_full.size() != net.node_count()) {
    throw ParseError("demand vector length does not match node count");
  }
  double total = b_full.sum();
  double scale = std::max(1.0, b_full.cwiseAbs().sum());
  if (std::abs(total) > 1e-12 * scale) {
    throw ParseError("demand vector does not sum to zero");
  }
  Demand dm;
  if (reference) {
    if (*reference < 0 || *reference >= net.node_count()) {
      throw ParseError("reference node index out of range");
    }
    dm.destination_ = *reference;
  } else {
    Index ref = -1;
    for (Index v = 0; v < b_full.size(); ++v) {
      if (b_full[v] > 0.0) {
        ref = v;
        break;
      }
    }
    if (ref < 0) throw ParseError("demand vector is identically zero");
    dm.destination_ = ref;
  }
  dm.b_full_ = std::move(b_full);
  return dm;
}

Index Demand::origin() const {
  if (!origin_) throw ParseError("general demand has no single origin");
  return *origin_;
}

Eigen::VectorXd Demand::reduced_vector() const {
  Eigen::VectorXd b(b_full_.size() - 1);
  Index r = 0;
  for (Index v = 0; v < b_full_.size(); ++v) {
    if (v == destination_) continue;
    b[r++] = b_full_[v];
  }
  return b;
}

ReducedSystem reduce(const Incidence& incidence, const Demand& demand) {
  const Index n = incidence.rows();
  const Index d = demand.destination();
  if (demand.full_vector().size() != n) {
    throw ParseError("demand and incidence dimensions disagree");
  }
  ReducedSystem rs;
  rs.dropped_row = d;
  rs.matrix.resize(n - 1, incidence.cols());
  std::vector<Eigen::Triplet<double>> trip;
  const auto& full = incidence.full();
  for (Index e = 0; e < full.outerSize(); ++e) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, e); it; ++it) {
      if (it.row() == d) continue;
      Index r = it.row() < d ? it.row() : it.row() - 1;
      trip.emplace_back(r, e, it.value());
    }
  }
  rs.matrix.setFromTriplets(trip.begin(), trip.end());
  rs.matrix.makeCompressed();
  rs.demand = demand.reduced_vector();
  return rs;
}

namespace {

// Reachability over link orientations; `forward` follows them, otherwise
// they are traversed in reverse.
std::vector<bool> reachable_from(const Network& net, Index start, bool forward) {
  std::vector<bool> seen(static_cast<size_t>(net.node_count()), false);
  std::deque<Index> queue{start};
  seen[static_cast<size_t>(start)] = true;
  while (!queue.empty()) {
    Index v = queue.front();
    queue.pop_front();
    const auto& adj = forward ? net.out_links()[static_cast<size_t>(v)]
                              : net.in_links()[static_cast<size_t>(v)];
    for (Index e : adj) {
      Index w = forward ? net.link(e).head : net.link(e).tail;
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = true;
        queue.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

std::optional<std::pair<std::string, std::string>> find_unreachable_pair(const Network& net) {
  // Strong connectivity == node 0 reaches everyone and everyone reaches node 0.
  auto fwd = reachable_from(net, 0, true);
  for (Index v = 0; v < net.node_count(); ++v) {
    if (!fwd[static_cast<size_t>(v)]) {
      return std::make_pair(net.node_id(0), net.node_id(v));
    }
  }
  auto bwd = reachable_from(net, 0, false);
  for (Index v = 0; v < net.node_count(); ++v) {
    if (!bwd[static_cast<size_t>(v)]) {
      return std::make_pair(net.node_id(v), net.node_id(0));
    }
  }
  return std::nullopt;
}

bool is_strongly_connected(const Network& net) {
  return !find_unreachable_pair(net).has_value();
}

Eigen::VectorXd positive_path_flow(const Network& net, Index origin, Index destination) {
  if (origin == destination) {
    throw ParseError("positive path flow requires distinct origin and destination");
  }
  // BFS by hop count; parent link recorded per node.
  std::vector<Index> parent_link(static_cast<size_t>(net.node_count()), -1);
  std::vector<bool> seen(static_cast<size_t>(net.node_count()), false);
  std::deque<Index> queue{origin};
  seen[static_cast<size_t>(origin)] = true;
  while (!queue.empty() && !seen[static_cast<size_t>(destination)]) {
    Index v = queue.front();
    queue.pop_front();
    for (Index e : net.out_links()[static_cast<size_t>(v)]) {
      Index w = net.link(e).head;
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = true;
        parent_link[static_cast<size_t>(w)] = e;
        queue.push_back(w);
      }
    }
  }
  if (!seen[static_cast<size_t>(destination)]) {
    throw ConnectivityError("no positive path from '" + net.node_id(origin) + "' to '" +
                            net.node_id(destination) + "'");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(net.link_count());
  Index v = destination;
  while (v != origin) {
    Index e = parent_link[static_cast<size_t>(v)];
    x[e] += 1.0;
    v = net.link(e).tail;
  }
  return x;
}

}  // namespace purc
