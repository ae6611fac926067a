#include "purc/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <random>

#include "purc/flow_recovery.hpp"
#include "purc/sensitivity.hpp"

namespace purc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Traversal counts of a fewest-hops walk from `from` to `to` using only
// masked links; empty path (all zeros) when from == to.
std::optional<Eigen::VectorXd> masked_path_flow(const Problem& pb, const std::vector<char>& mask,
                                                Index from, Index to) {
  const Network& net = pb.network();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(net.link_count());
  if (from == to) return x;
  std::vector<Index> parent_link(static_cast<size_t>(net.node_count()), -1);
  std::vector<bool> seen(static_cast<size_t>(net.node_count()), false);
  std::deque<Index> queue{from};
  seen[static_cast<size_t>(from)] = true;
  while (!queue.empty() && !seen[static_cast<size_t>(to)]) {
    Index v = queue.front();
    queue.pop_front();
    for (Index e : net.out_links()[static_cast<size_t>(v)]) {
      if (!mask[static_cast<size_t>(e)]) continue;
      Index w = net.link(e).head;
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = true;
        parent_link[static_cast<size_t>(w)] = e;
        queue.push_back(w);
      }
    }
  }
  if (!seen[static_cast<size_t>(to)]) return std::nullopt;
  Index v = to;
  while (v != from) {
    Index e = parent_link[static_cast<size_t>(v)];
    x[e] += 1.0;
    v = net.link(e).tail;
  }
  return x;
}

// Derivative of h_e for the oracle's stationarity system: one-sided at the
// domain boundary, midpoint of the subdifferential interval at a kink.
double primal_derivative(const LinkPerturbation& p, double xi) {
  if (xi <= 0.0) return p.grad_primal_upper(0.0);
  double lo = p.grad_primal_lower(xi);
  double hi = p.grad_primal_upper(xi);
  return lo == hi ? lo : 0.5 * (lo + hi);
}

struct SupportCandidate {
  Eigen::VectorXd flow;  // full link space
  double value = kInf;
  Eigen::VectorXd multipliers;
  bool certified = false;
};

}  // namespace

BruteForceResult brute_force_primal(const Problem& pb) {
  const Index m = pb.link_count();
  if (m > 16) throw ParseError("brute-force enumeration is limited to 16 links");
  Index kinked_total = 0;
  for (Index e = 0; e < m; ++e) {
    if (!pb.perturbation(e).primal_kink_points().empty()) ++kinked_total;
  }
  // Kinked links double their face count (pinned at the kink or not), so
  // they tighten the enumeration bound.
  if (m + kinked_total > 20) {
    throw ParseError("brute-force enumeration is limited to 20 face bits (links plus kinked links)");
  }
  if (!pb.demand().is_single_od()) {
    throw ParseError("brute-force oracle requires single origin-destination demand");
  }
  const Index origin = pb.demand().origin();
  const Index dest = pb.demand().destination();
  const Eigen::VectorXd& c = pb.costs();
  const double cost_scale = std::max(1.0, c.cwiseAbs().maxCoeff());

  std::vector<char> needs_interior(static_cast<size_t>(m));
  for (Index e = 0; e < m; ++e) {
    needs_interior[static_cast<size_t>(e)] =
        std::isinf(pb.perturbation(e).grad_primal_upper(0.0)) ? 1 : 0;
  }

  auto domain_ok = [&](const Eigen::VectorXd& x) {
    for (Index e = 0; e < x.size(); ++e) {
      if (x[e] < 0.0) return false;
      if (x[e] == 0.0 && needs_interior[static_cast<size_t>(e)]) return false;
    }
    return true;
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    if (!domain_ok(x)) return kInf;
    double v = 0.0;
    for (Index e = 0; e < x.size(); ++e) {
      v += c[e] * x[e] + pb.perturbation(e).eval(x[e]);
    }
    return v;
  };

  BruteForceResult result;
  result.primal_value = kInf;
  SupportCandidate best;
  SupportCandidate best_certified;

  const std::uint32_t n_masks = 1u << m;
  for (std::uint32_t mask = 1; mask < n_masks; ++mask) {
    std::vector<char> in(static_cast<size_t>(m), 0);
    std::vector<Index> s_links;
    for (Index e = 0; e < m; ++e) {
      if (mask & (1u << e)) {
        in[static_cast<size_t>(e)] = 1;
        s_links.push_back(e);
      }
    }
    auto base = masked_path_flow(pb, in, origin, dest);
    if (!base || base->maxCoeff() <= 0.0) continue;
    ++result.supports_examined;

    // Strictly positive feasible start: mix the base path with covering
    // walks (an origin-destination walk through e, else a circulation
    // through e). A link with neither carries zero in every feasible flow
    // of this face, so the face is already enumerated by a smaller support.
    std::vector<Eigen::VectorXd> od_walks{*base};
    std::vector<Eigen::VectorXd> circulations;
    bool face_proper = true;
    for (Index e : s_links) {
      bool covered = (*base)[e] > 0.0;
      for (const auto& w : od_walks) covered = covered || w[e] > 0.0;
      for (const auto& w : circulations) covered = covered || w[e] > 0.0;
      if (covered) continue;
      Index t = pb.network().link(e).tail;
      Index h = pb.network().link(e).head;
      auto p1 = masked_path_flow(pb, in, origin, t);
      auto p2 = masked_path_flow(pb, in, h, dest);
      if (p1 && p2) {
        Eigen::VectorXd w = *p1 + *p2;
        w[e] += 1.0;
        od_walks.push_back(std::move(w));
        continue;
      }
      auto back = masked_path_flow(pb, in, h, t);
      if (back) {
        Eigen::VectorXd w = *back;
        w[e] += 1.0;
        circulations.push_back(std::move(w));
        continue;
      }
      face_proper = false;
      break;
    }
    if (!face_proper) continue;

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(m);
    double path_weight = 1.0 / static_cast<double>(od_walks.size());
    for (const auto& w : od_walks) x0 += path_weight * w;
    for (const auto& w : circulations) x0 += 0.5 * w;

    // Equality-constrained subproblems on the support. An optimal flow can
    // rest exactly on a primal kink (only the piecewise family has one),
    // where the subdifferential interval absorbs stationarity and no smooth
    // solve can express the point. So for every way of pinning the
    // support's kinked links at a kink value, solve the remaining smooth
    // problem by Newton on a nullspace parameterization; the certificate
    // checks the interval at pinned coordinates.
    const Index s = static_cast<Index>(s_links.size());
    Eigen::MatrixXd a_s = Eigen::MatrixXd::Zero(pb.reduced_dim(), s);
    for (Index i = 0; i < s; ++i) {
      Index e = s_links[static_cast<size_t>(i)];
      if (pb.tail_row(e) >= 0) a_s(pb.tail_row(e), i) = -1.0;
      if (pb.head_row(e) >= 0) a_s(pb.head_row(e), i) = +1.0;
    }
    Eigen::MatrixXd kernel = nullspace_basis(a_s);

    Eigen::VectorXd x0_s(s);
    for (Index i = 0; i < s; ++i) x0_s[i] = x0[s_links[static_cast<size_t>(i)]];
    if (kernel.cols() > 0) {
      // Path-cover mixing produces rational coordinates that land exactly
      // on kinks; a small deterministic kernel jiggle moves the start to a
      // point in general position while preserving feasibility.
      std::uint64_t h = 0x9e3779b97f4a7c15ull ^ (static_cast<std::uint64_t>(mask) << 17);
      Eigen::VectorXd r(kernel.cols());
      for (Index j = 0; j < kernel.cols(); ++j) {
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdull;
        r[j] = 0.25 + 0.5 * (static_cast<double>(h >> 11) * 0x1.0p-53);
      }
      Eigen::VectorXd dir = kernel * r;
      double delta = 1e-3;
      for (Index i = 0; i < s; ++i) {
        if (dir[i] != 0.0) delta = std::min(delta, 0.25 * x0_s[i] / std::abs(dir[i]));
      }
      x0_s += delta * dir;
    }

    std::vector<Index> kinked_pos;
    std::vector<std::vector<double>> kink_options;
    for (Index i = 0; i < s; ++i) {
      auto kinks = pb.perturbation(s_links[static_cast<size_t>(i)]).primal_kink_points();
      if (!kinks.empty()) {
        kinked_pos.push_back(i);
        kink_options.push_back(std::move(kinks));
      }
    }

    const double stat_tol = 1e-11 * cost_scale;
    std::vector<Index> pin_state(kinked_pos.size(), 0);  // 0: free, j: kinks[j-1]
    bool more_pins = true;
    while (more_pins) {
      // Apply the pin pattern, restoring conservation with a minimum-norm
      // correction of the free coordinates.
      Eigen::VectorXd xs = x0_s;
      std::vector<char> pinned(static_cast<size_t>(s), 0);
      for (size_t kp = 0; kp < kinked_pos.size(); ++kp) {
        if (pin_state[kp] == 0) continue;
        Index i = kinked_pos[kp];
        xs[i] = kink_options[kp][static_cast<size_t>(pin_state[kp] - 1)];
        pinned[static_cast<size_t>(i)] = 1;
      }
      std::vector<Index> free_pos;
      for (Index i = 0; i < s; ++i) {
        if (!pinned[static_cast<size_t>(i)]) free_pos.push_back(i);
      }
      const Index f = static_cast<Index>(free_pos.size());
      bool combo_ok = true;
      Eigen::MatrixXd a_f(pb.reduced_dim(), f);
      for (Index j = 0; j < f; ++j) a_f.col(j) = a_s.col(free_pos[static_cast<size_t>(j)]);
      if (!kinked_pos.empty()) {
        Eigen::VectorXd residual = -a_s * (xs - x0_s);
        if (f > 0) {
          Eigen::VectorXd delta = a_f.completeOrthogonalDecomposition().solve(residual);
          for (Index j = 0; j < f; ++j) xs[free_pos[static_cast<size_t>(j)]] += delta[j];
          if ((a_f * delta - residual).cwiseAbs().maxCoeff() > 1e-9) combo_ok = false;
        } else if (residual.cwiseAbs().maxCoeff() > 1e-9) {
          combo_ok = false;
        }
      }

      auto phi_s = [&](const Eigen::VectorXd& xvec) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
        for (Index i = 0; i < s; ++i) full[s_links[static_cast<size_t>(i)]] = xvec[i];
        return objective(full);
      };
      if (combo_ok && !std::isfinite(phi_s(xs))) combo_ok = false;

      bool stationary = false;
      if (combo_ok) {
        Eigen::MatrixXd basis = nullspace_basis(a_f);
        if (basis.cols() == 0) {
          stationary = true;  // the pinned face is a single point
        } else {
          // One-sided derivative policies: -1 lower, 0 midpoint, +1 upper.
          auto free_gradient = [&](int policy) {
            Eigen::VectorXd g(f);
            for (Index j = 0; j < f; ++j) {
              Index i = free_pos[static_cast<size_t>(j)];
              const LinkPerturbation& p = pb.perturbation(s_links[static_cast<size_t>(i)]);
              double xi = xs[i];
              double d;
              if (xi <= 0.0) {
                d = p.grad_primal_upper(0.0);
              } else if (policy < 0) {
                d = p.grad_primal_lower(xi);
              } else if (policy > 0) {
                d = p.grad_primal_upper(xi);
              } else {
                d = primal_derivative(p, xi);
              }
              g[j] = c[s_links[static_cast<size_t>(i)]] + d;
            }
            return g;
          };
          // `strict` demands a decrease the floating-point objective can
          // observe, so sub-noise wiggles do not count as progress.
          auto try_step = [&](const Eigen::VectorXd& dz, double slope, bool allow_full,
                              bool strict) {
            auto phi_at = [&](double t) {
              Eigen::VectorXd trial = xs;
              Eigen::VectorXd move = basis * dz;
              for (Index j = 0; j < f; ++j) {
                trial[free_pos[static_cast<size_t>(j)]] += t * move[j];
              }
              return phi_s(trial);
            };
            double phi0 = phi_at(0.0);
            if (!std::isfinite(phi0)) return false;
            double noise =
                8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(phi0));
            double t = 1.0;
            bool accepted = false;
            if (allow_full && -slope < noise && phi_at(1.0) < kInf) {
              accepted = true;  // decrease below objective resolution: contract
            } else {
              while (t > 1e-18) {
                double trial = phi_at(t);
                bool armijo = trial <= phi0 + 1e-4 * t * slope;
                if (armijo && (!strict || phi0 - trial >= noise)) {
                  accepted = true;
                  break;
                }
                t *= 0.5;
              }
            }
            if (!accepted) return false;
            Eigen::VectorXd move = basis * dz;
            for (Index j = 0; j < f; ++j) xs[free_pos[static_cast<size_t>(j)]] += t * move[j];
            return true;
          };

          for (int iter = 0; iter < 300; ++iter) {
            Eigen::VectorXd gz = basis.transpose() * free_gradient(0);
            if (gz.cwiseAbs().maxCoeff() <= stat_tol) {
              stationary = true;
              break;
            }
            Eigen::VectorXd curv(f);
            for (Index j = 0; j < f; ++j) {
              Index i = free_pos[static_cast<size_t>(j)];
              curv[j] = pb.perturbation(s_links[static_cast<size_t>(i)])
                            .hess_primal(std::max(xs[i], 1e-300))
                            .value;
            }
            Eigen::MatrixXd hz = basis.transpose() * curv.asDiagonal() * basis;
            hz.diagonal().array() += 1e-13 * std::max(1.0, hz.diagonal().maxCoeff());
            Eigen::LLT<Eigen::MatrixXd> llt(hz);
            Eigen::VectorXd dz;
            if (llt.info() == Eigen::Success) {
              dz = -llt.solve(gz);
              if (!(dz.dot(gz) < 0.0) || !dz.allFinite()) dz = -gz;
            } else {
              dz = -gz;
            }
            if (try_step(dz, gz.dot(dz), true, false)) continue;
            // The midpoint gradient misleads when an iterate transiently
            // crosses a free kink; a one-sided gradient steps across.
            bool moved = false;
            for (int policy : {-1, +1}) {
              Eigen::VectorXd g_side = basis.transpose() * free_gradient(policy);
              if (g_side.cwiseAbs().maxCoeff() <= stat_tol) {
                stationary = true;
                moved = true;
                break;
              }
              if (try_step(-g_side, -g_side.squaredNorm(), false, true)) {
                moved = true;
                break;
              }
            }
            if (stationary || !moved) break;
          }
        }
      }

      if (stationary) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
        for (Index i = 0; i < s; ++i) x[s_links[static_cast<size_t>(i)]] = xs[i];
        // Snap roundoff-negative entries and admit.
        bool admissible = true;
        for (Index e = 0; e < m; ++e) {
          if (x[e] < 0.0) {
            if (x[e] < -1e-9) {
              admissible = false;
              break;
            }
            x[e] = 0.0;
          }
        }
        if (admissible && domain_ok(x)) {
          ++result.candidates;
          double value = objective(x);

          // Multipliers from the free coordinates' stationarity (a pinned
          // coordinate only pins the tension to an interval, checked below),
          // then the sign/interval conditions.
          Eigen::VectorXd rhs(f);
          for (Index j = 0; j < f; ++j) {
            Index e = s_links[static_cast<size_t>(free_pos[static_cast<size_t>(j)])];
            rhs[j] = c[e] + primal_derivative(pb.perturbation(e), x[e]);
          }
          Eigen::VectorXd u =
              f > 0 ? Eigen::VectorXd(a_f.transpose().completeOrthogonalDecomposition().solve(rhs))
                    : Eigen::VectorXd::Zero(pb.reduced_dim());
          bool certified = true;
          const double cert_tol = 1e-9 * cost_scale;
          for (Index e = 0; e < m; ++e) {
            double eta = pb.tension(u, e) - c[e];
            if (in[static_cast<size_t>(e)] && x[e] > 0.0) {
              double lo = pb.perturbation(e).grad_primal_lower(x[e]);
              double hi = pb.perturbation(e).grad_primal_upper(x[e]);
              if (eta < lo - cert_tol || eta > hi + cert_tol) certified = false;
            } else {
              if (eta > pb.perturbation(e).grad_primal_upper(0.0) + cert_tol) certified = false;
            }
            if (!certified) break;
          }

          if (value < best.value) best = {x, value, u, certified};
          if (certified && value < best_certified.value) {
            best_certified = {x, value, u, certified};
          }
        }
      }

      // Next pin pattern (mixed radix over the kinked links).
      more_pins = false;
      for (size_t kp = 0; kp < pin_state.size(); ++kp) {
        if (pin_state[kp] < static_cast<Index>(kink_options[kp].size())) {
          ++pin_state[kp];
          std::fill(pin_state.begin(), pin_state.begin() + static_cast<long>(kp), 0);
          more_pins = true;
          break;
        }
        // carry
      }
    }
  }

  const SupportCandidate& winner = best_certified.certified ? best_certified : best;
  if (!std::isfinite(winner.value)) {
    throw ConnectivityError("no feasible support found; demand is infeasible");
  }
  result.flow = winner.flow;
  result.primal_value = winner.value;
  result.multipliers = winner.multipliers;
  result.certified = winner.certified;
  result.active_set = support(winner.flow);
  return result;
}

TwoLinkSolution two_link_closed_form(double c1, double c2) {
  TwoLinkSolution s;
  double ex = std::exp(-c1 - c2 - 2.0);
  s.discriminant = 1.0 + 4.0 * ex;
  double sq = std::sqrt(s.discriminant);
  s.flow << 0.5 * (sq + 1.0), 0.5 * (sq - 1.0);
  s.potential = -(1.0 + c1 + std::log(0.5 * (1.0 + sq)));
  s.jacobian = -(ex / sq) * Eigen::Matrix2d::Ones();
  return s;
}

Problem two_link_problem(double c1, double c2) {
  Network net({{"e1", "v1", "v2"}, {"e2", "v2", "v1"}});
  Demand demand = Demand::single_od(net, "v1", "v2");
  Eigen::VectorXd costs(2);
  costs << c1, c2;
  Problem pb(std::move(net), {entropy(), entropy()}, std::move(costs), std::move(demand));
  pb.set_perturbation_specs({{"entropy", 1.0, 1.0}, {"entropy", 1.0, 1.0}});
  return pb;
}

CircuitSolution circuit_solve(const Network& net, const Eigen::VectorXd& resistances,
                              const Demand& demand) {
  if (resistances.size() != net.link_count()) {
    throw ParseError("resistance vector length does not match link count");
  }
  if ((resistances.array() <= 0.0).any()) {
    throw ParseError("resistances must be strictly positive");
  }
  Incidence inc(net);
  ReducedSystem rs = reduce(inc, demand);
  Eigen::MatrixXd a(rs.matrix);
  Eigen::VectorXd conductance = resistances.cwiseInverse();
  Eigen::MatrixXd lap = a * conductance.asDiagonal() * a.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(lap);
  Eigen::VectorXd u = ldlt.solve(rs.demand);
  double resid = (lap * u - rs.demand).cwiseAbs().maxCoeff();
  if (!u.allFinite() || resid > 1e-9 * std::max(1.0, rs.demand.cwiseAbs().maxCoeff())) {
    throw ConnectivityError("conductance Laplacian is singular; the circuit is disconnected");
  }
  CircuitSolution sol;
  sol.potential = u;
  sol.flow = conductance.asDiagonal() * (a.transpose() * u);
  return sol;
}

Problem random_problem(std::uint64_t seed, const RandomProblemConfig& config) {
  std::mt19937_64 rng(seed);
  auto next_int = [&rng](int lo, int hi) {  // inclusive, portable
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  auto next_real = [&rng](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };

  const int n_nodes = next_int(config.min_nodes, config.max_nodes);
  const int n_links = next_int(std::max(config.min_links, n_nodes), config.max_links);

  std::vector<Link> links;
  auto node_name = [](int i) { return "n" + std::to_string(i + 1); };
  // Spanning cycle keeps every instance strongly connected.
  for (int i = 0; i < n_nodes; ++i) {
    links.push_back({"e" + std::to_string(i + 1), node_name(i), node_name((i + 1) % n_nodes)});
  }
  for (int e = n_nodes; e < n_links; ++e) {
    int from = next_int(0, n_nodes - 1);
    int to = next_int(0, n_nodes - 2);
    if (to >= from) ++to;
    links.push_back({"e" + std::to_string(e + 1), node_name(from), node_name(to)});
  }

  Network net(links);
  std::vector<PerturbationPtr> perts;
  std::vector<PerturbationSpec> specs;
  Eigen::VectorXd costs(n_links);
  for (int e = 0; e < n_links; ++e) {
    const std::string& family =
        config.families[static_cast<size_t>(next_int(0, static_cast<int>(config.families.size()) - 1))];
    perts.push_back(make_perturbation(family));
    specs.push_back({family, 1.0, 1.0});
    costs[e] = next_real(config.cost_lo, config.cost_hi);
  }
  int origin = next_int(0, n_nodes - 1);
  int dest = next_int(0, n_nodes - 2);
  if (dest >= origin) ++dest;
  Demand demand = Demand::single_od(net, node_name(origin), node_name(dest));

  Problem pb(std::move(net), std::move(perts), std::move(costs), std::move(demand));
  pb.set_perturbation_specs(std::move(specs));
  return pb;
}

}  // namespace purc
