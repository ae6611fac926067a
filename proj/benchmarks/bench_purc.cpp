#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "purc/dual_solver.hpp"
#include "purc/flow_recovery.hpp"
#include "purc/oracle.hpp"
#include "purc/sensitivity.hpp"

namespace {

using purc::Index;

purc::Problem four_node_problem() {
  purc::Network net({{"1->2", "1", "2"}, {"1->3", "1", "3"}, {"2->3", "2", "3"},
                     {"2->4", "2", "4"}, {"3->4", "3", "4"}, {"4->1", "4", "1"}});
  purc::Demand demand = purc::Demand::single_od(net, "1", "4");
  Eigen::VectorXd costs(6);
  costs << 1.0, 2.0, 0.9, 2.0, 1.0, 1.0;
  return purc::Problem(std::move(net), std::vector<purc::PerturbationPtr>(6, purc::quadratic()),
                       std::move(costs), std::move(demand));
}

purc::Problem grid_problem(int n, bool entropy_links = false) {
  std::vector<purc::Link> links;
  auto name = [n](int i, int j) { return "g" + std::to_string(i * n + j); };
  int id = 0;
  auto add = [&](int i1, int j1, int i2, int j2) {
    links.push_back({"e" + std::to_string(id++), name(i1, j1), name(i2, j2)});
    links.push_back({"e" + std::to_string(id++), name(i2, j2), name(i1, j1)});
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j + 1 < n) add(i, j, i, j + 1);
      if (i + 1 < n) add(i, j, i + 1, j);
    }
  }
  purc::Network net(links);
  purc::Demand demand = purc::Demand::single_od(net, name(0, 0), name(n - 1, n - 1));
  std::mt19937_64 rng(1234);
  Eigen::VectorXd costs(net.link_count());
  for (Index e = 0; e < costs.size(); ++e) {
    costs[e] = 0.5 + 1.5 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  }
  auto family = entropy_links ? purc::entropy() : purc::quadratic();
  std::vector<purc::PerturbationPtr> perts(static_cast<size_t>(net.link_count()), family);
  return purc::Problem(std::move(net), std::move(perts), std::move(costs), std::move(demand));
}

void BM_DualGradient(benchmark::State& state) {
  purc::Problem pb = grid_problem(static_cast<int>(state.range(0)));
  Eigen::VectorXd u = Eigen::VectorXd::Constant(pb.reduced_dim(), -0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(purc::dual_gradient(pb, u));
  }
  state.SetItemsProcessed(state.iterations() * pb.link_count());
}
BENCHMARK(BM_DualGradient)->Arg(8)->Arg(16)->Arg(23);

void BM_DualHessian(benchmark::State& state) {
  purc::Problem pb = grid_problem(static_cast<int>(state.range(0)));
  purc::DualReport rep = purc::solve_newton(pb);
  for (auto _ : state) {
    benchmark::DoNotOptimize(purc::dual_hessian(pb, rep.u_hat));
  }
}
BENCHMARK(BM_DualHessian)->Arg(8)->Arg(16);

void BM_NewtonSolve(benchmark::State& state) {
  purc::Problem pb = grid_problem(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    purc::DualReport rep = purc::solve_newton(pb);
    benchmark::DoNotOptimize(rep.u_hat);
  }
  state.counters["links"] = static_cast<double>(pb.link_count());
}
BENCHMARK(BM_NewtonSolve)->Arg(8)->Arg(16)->Arg(23)->Unit(benchmark::kMillisecond);

void BM_NewtonSolveEntropy(benchmark::State& state) {
  purc::Problem pb = grid_problem(static_cast<int>(state.range(0)), true);
  for (auto _ : state) {
    purc::DualReport rep = purc::solve_newton(pb);
    benchmark::DoNotOptimize(rep.u_hat);
  }
}
BENCHMARK(BM_NewtonSolveEntropy)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_FixedStepAscent(benchmark::State& state) {
  purc::Problem pb = four_node_problem();
  purc::SolverConfig config;
  config.fixed_step = 0.05;
  for (auto _ : state) {
    purc::DualReport rep = purc::solve_gradient_ascent(pb, config);
    benchmark::DoNotOptimize(rep.u_hat);
  }
}
BENCHMARK(BM_FixedStepAscent);

void BM_RecoverFlow(benchmark::State& state) {
  purc::Problem pb = grid_problem(static_cast<int>(state.range(0)));
  purc::DualReport rep = purc::solve_newton(pb);
  for (auto _ : state) {
    benchmark::DoNotOptimize(purc::recover_flow(pb, rep.u_hat));
  }
}
BENCHMARK(BM_RecoverFlow)->Arg(16)->Arg(23);

void BM_JacobianForms(benchmark::State& state) {
  purc::Problem pb = four_node_problem();
  purc::FlowSolution sol = purc::recover_flow(pb, purc::solve_newton(pb).u_hat);
  for (auto _ : state) {
    switch (state.range(0)) {
      case 0:
        benchmark::DoNotOptimize(purc::jacobian_nullspace(pb, sol));
        break;
      case 1:
        benchmark::DoNotOptimize(purc::jacobian_laplacian(pb, sol));
        break;
      default:
        benchmark::DoNotOptimize(purc::jacobian_reduced(pb, sol));
        break;
    }
  }
}
BENCHMARK(BM_JacobianForms)->Arg(0)->Arg(1)->Arg(2);

void BM_BruteForcePrimal(benchmark::State& state) {
  purc::RandomProblemConfig rc;
  rc.min_nodes = 4;
  rc.max_nodes = 6;
  rc.min_links = static_cast<int>(state.range(0));
  rc.max_links = static_cast<int>(state.range(0));
  purc::Problem pb = purc::random_problem(7, rc);
  for (auto _ : state) {
    benchmark::DoNotOptimize(purc::brute_force_primal(pb));
  }
}
BENCHMARK(BM_BruteForcePrimal)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
