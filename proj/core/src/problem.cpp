#include "purc/problem.hpp"

namespace purc {

Problem::Problem(Network net, std::vector<PerturbationPtr> perturbations, Eigen::VectorXd costs,
                 Demand demand, Options options)
    : net_(std::move(net)),
      perturbations_(std::move(perturbations)),
      costs_(std::move(costs)),
      demand_(std::move(demand)),
      incidence_(net_) {
  if (static_cast<Index>(perturbations_.size()) != net_.link_count()) {
    throw ParseError("perturbation count does not match link count");
  }
  if (costs_.size() != net_.link_count()) {
    throw ParseError("cost vector length does not match link count");
  }
  for (const auto& p : perturbations_) {
    if (!p) throw ParseError("null perturbation");
  }
  if (options.check_connectivity) {
    if (auto pair = find_unreachable_pair(net_)) {
      throw ConnectivityError("network is not strongly connected: no positive path from '" +
                              pair->first + "' to '" + pair->second + "'");
    }
  }
  reduced_ = reduce(incidence_, demand_);

  const Index d = demand_.destination();
  auto row_of = [d](Index v) -> Index {
    if (v == d) return -1;
    return v < d ? v : v - 1;
  };
  tail_row_.reserve(static_cast<size_t>(net_.link_count()));
  head_row_.reserve(static_cast<size_t>(net_.link_count()));
  for (Index e = 0; e < net_.link_count(); ++e) {
    tail_row_.push_back(row_of(net_.link(e).tail));
    head_row_.push_back(row_of(net_.link(e).head));
  }
}

Eigen::VectorXd Problem::tensions(const Eigen::VectorXd& u) const {
  Eigen::VectorXd t(link_count());
  for (Index e = 0; e < link_count(); ++e) t[e] = tension(u, e);
  return t;
}

void Problem::set_perturbation_specs(std::vector<PerturbationSpec> specs) {
  if (static_cast<Index>(specs.size()) != link_count()) {
    throw ParseError("perturbation spec count does not match link count");
  }
  specs_ = std::move(specs);
}

Problem with_costs(const Problem& base, Eigen::VectorXd costs) {
  Problem::Options opts;
  opts.check_connectivity = false;  // topology unchanged
  Problem p(base.network(), base.perturbations(), std::move(costs), base.demand(), opts);
  if (base.perturbation_specs()) p.set_perturbation_specs(*base.perturbation_specs());
  return p;
}

}  // namespace purc
