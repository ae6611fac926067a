#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "purc/dual_solver.hpp"
#include "purc/flow_recovery.hpp"
#include "purc/io.hpp"
#include "purc/oracle.hpp"
#include "purc/sensitivity.hpp"
#include "purc/version.hpp"

namespace {

using purc::Index;
using purc::Json;

// Exit codes shared with scripts and tests.
constexpr int kExitFailure = 1;
constexpr int kExitParse = 2;
constexpr int kExitConnectivity = 3;
constexpr int kExitNonConvergence = 4;
constexpr int kExitValidation = 5;
constexpr int kExitGenericity = 6;

int log_level() {
  static int level = [] {
    const char* env = std::getenv("PURC_LOG");
    if (!env) return 0;
    std::string v(env);
    if (v == "debug" || v == "trace") return 2;
    if (v == "info") return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[purc] " << msg << "\n";
}

class PhaseTimer {
 public:
  explicit PhaseTimer(std::string name)
      : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
                  .count();
    log_info(name_ + ": " + std::to_string(ms) + " ms");
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

purc::SolveMethod parse_method(const std::string& name) {
  if (name == "newton") return purc::SolveMethod::DampedNewton;
  if (name == "ascent") return purc::SolveMethod::GradientAscent;
  if (name == "auto") return purc::SolveMethod::Auto;
  throw purc::ParseError("unknown method '" + name + "' (expected newton|ascent|auto)");
}

// Shared solve options.
struct SolveArgs {
  std::string network_path;
  std::string origin;
  std::string destination;
  std::string demand_path;
  std::string reference;
  std::string method = "newton";
  double tol = 1e-10;
  double alpha = 0.0;  // > 0 enables fixed-step ascent
  int max_iter = 0;    // 0 keeps per-method defaults
  std::string out = "solution.json";
  std::string export_csv;
};

void add_demand_options(CLI::App* cmd, SolveArgs& args) {
  cmd->add_option("--origin", args.origin, "Origin node id");
  cmd->add_option("--destination", args.destination, "Destination node id");
  cmd->add_option("--demand", args.demand_path, "Balanced demand CSV (node,b)");
  cmd->add_option("--reference", args.reference,
                  "Grounded node for a balanced demand file (default: first node with b > 0)");
}

purc::Demand make_demand(const purc::Network& net, const SolveArgs& args) {
  if (!args.demand_path.empty()) {
    std::optional<std::string> ref;
    if (!args.reference.empty()) ref = args.reference;
    return purc::read_demand_csv(net, args.demand_path, ref);
  }
  if (args.origin.empty() || args.destination.empty()) {
    throw purc::ParseError("provide --origin and --destination, or a --demand file");
  }
  return purc::Demand::single_od(net, args.origin, args.destination);
}

purc::SolverConfig make_config(const SolveArgs& args) {
  purc::SolverConfig config;
  config.method = parse_method(args.method);
  config.grad_tol = args.tol;
  if (args.alpha > 0.0) {
    config.fixed_step = args.alpha;
    config.method = purc::SolveMethod::GradientAscent;
  }
  if (args.max_iter > 0) {
    config.max_iter_gradient = args.max_iter;
    config.max_iter_newton = args.max_iter;
  }
  config.record_trace = log_level() >= 2;
  return config;
}

// Every distinct perturbation used by the problem must pass its audit before
// we solve with it.
void validate_specs(const std::vector<purc::PerturbationSpec>& specs) {
  std::set<std::tuple<std::string, double, double>> seen;
  for (const auto& spec : specs) {
    auto key = std::make_tuple(spec.family, spec.beta, spec.gamma);
    if (!seen.insert(key).second) continue;
    auto report = purc::validate(*purc::make_perturbation(spec));
    if (!report.ok()) {
      std::ostringstream msg;
      msg << "perturbation " << spec.family << "(param1=" << spec.beta
          << ", param2=" << spec.gamma << ") failed validation:";
      for (const auto& issue : report.issues) {
        msg << " [" << issue.check << " at " << issue.point << "]";
      }
      throw purc::ValidationError(msg.str());
    }
  }
}

Json config_echo(const SolveArgs& args) {
  Json config;
  config["method"] = args.method;
  config["tol"] = args.tol;
  if (args.alpha > 0.0) config["alpha"] = args.alpha;
  if (args.max_iter > 0) config["max_iter"] = args.max_iter;
  return config;
}

void export_solution_csv(const purc::Problem& pb, const purc::FlowSolution& sol,
                         const std::string& prefix) {
  {
    std::ofstream out(prefix + "_flows.csv");
    if (!out) throw purc::ParseError("cannot write '" + prefix + "_flows.csv'");
    out << "link_id,flow,active\n";
    std::set<Index> active(sol.active_set.begin(), sol.active_set.end());
    out << std::setprecision(17);
    for (Index e = 0; e < pb.link_count(); ++e) {
      out << pb.network().link(e).id << "," << sol.flow[e] << "," << (active.count(e) ? 1 : 0)
          << "\n";
    }
  }
  {
    std::ofstream out(prefix + "_potentials.csv");
    if (!out) throw purc::ParseError("cannot write '" + prefix + "_potentials.csv'");
    out << "node,u\n";
    out << std::setprecision(17);
    const Index dest = pb.demand().destination();
    for (Index v = 0; v < pb.node_count(); ++v) {
      double u = v == dest ? 0.0 : sol.potential[v < dest ? v : v - 1];
      out << pb.network().node_id(v) << "," << u << "\n";
    }
  }
}

int cmd_solve(const SolveArgs& args) {
  purc::NetworkFile nf;
  {
    PhaseTimer t("parse");
    nf = purc::read_network_csv(args.network_path);
    validate_specs(nf.specs);
  }
  purc::Network net(nf.links);
  purc::Demand demand = make_demand(net, args);
  purc::Problem pb = purc::assemble_problem(nf, std::move(net), std::move(demand));

  purc::Manifest manifest;
  manifest.input_hashes.emplace_back("network", purc::file_hash_hex(args.network_path));
  if (!args.demand_path.empty()) {
    manifest.input_hashes.emplace_back("demand", purc::file_hash_hex(args.demand_path));
  }
  manifest.config = config_echo(args);

  purc::SolverConfig config = make_config(args);
  purc::DualReport report;
  {
    PhaseTimer t("solve");
    report = purc::solve_dual(pb, config);
  }
  if (log_level() >= 2) {
    for (const auto& rec : report.trace) {
      std::cerr << "[purc]   iter " << rec.iteration << " kind " << rec.kind << " g "
                << rec.objective << " |grad| " << rec.grad_norm << " step " << rec.step << "\n";
    }
  }
  if (!report.converged) {
    std::cerr << "purc solve: did not converge within the iteration budget (final gradient norm "
              << report.final_grad_norm << ")\n";
    Json j;
    j["schema"] = "purc-solution-v1";
    j["manifest"] = purc::manifest_to_json(manifest);
    j["solution"] = Json{{"method", purc::to_string(report.method_used)},
                         {"converged", false},
                         {"iterations", report.iterations},
                         {"final_grad_norm", report.final_grad_norm}};
    purc::write_json_file(j, args.out);
    return kExitNonConvergence;
  }

  purc::FlowSolution sol;
  {
    PhaseTimer t("recover");
    sol = purc::recover_flow(pb, report.u_hat, std::max(args.tol, 1e-12));
  }
  purc::write_json_file(purc::solution_to_json(pb, report, sol, manifest), args.out);
  if (!args.export_csv.empty()) export_solution_csv(pb, sol, args.export_csv);
  log_info("wrote " + args.out);
  return 0;
}

struct JacobianArgs {
  std::string solution_path;
  std::string method = "all";
  bool fd_check = false;
  double fd_step = 1e-5;
  std::string out = "jacobian.json";
  std::string export_csv;
};

void export_jacobian_csv(const purc::Problem& pb, const Eigen::MatrixXd& m,
                         const std::string& prefix) {
  std::ofstream out(prefix + "_jacobian.csv");
  if (!out) throw purc::ParseError("cannot write '" + prefix + "_jacobian.csv'");
  out << "link_id";
  for (Index e = 0; e < pb.link_count(); ++e) out << "," << pb.network().link(e).id;
  out << "\n" << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    out << pb.network().link(i).id;
    for (Index j = 0; j < m.cols(); ++j) out << "," << m(i, j);
    out << "\n";
  }
}

int cmd_jacobian(const JacobianArgs& args) {
  purc::LoadedSolution loaded = purc::load_solution_json(args.solution_path);
  const purc::Problem& pb = loaded.problem;

  purc::Manifest manifest;
  manifest.input_hashes.emplace_back("solution", purc::file_hash_hex(args.solution_path));
  manifest.config = Json{{"method", args.method}, {"fd_check", args.fd_check}};
  if (args.fd_check) manifest.config["fd_step"] = args.fd_step;

  if (args.method != "nullspace" && args.method != "laplacian" && args.method != "reduced" &&
      args.method != "all") {
    throw purc::ParseError("unknown jacobian method '" + args.method +
                           "' (expected nullspace|laplacian|reduced|all)");
  }
  purc::GenericityReport generic = purc::genericity_check(pb, loaded.solution);
  std::vector<std::pair<std::string, purc::JacobianResult>> results;
  std::string reduced_skip_reason;
  {
    PhaseTimer t("jacobian");
    if (args.method == "nullspace" || args.method == "all") {
      results.emplace_back("nullspace", purc::jacobian_nullspace(pb, loaded.solution));
    }
    if (args.method == "laplacian" || args.method == "all") {
      results.emplace_back("laplacian", purc::jacobian_laplacian(pb, loaded.solution));
    }
    if (args.method == "reduced") {
      // Explicit request: surface the library's error rather than skipping.
      results.emplace_back("reduced_laplacian", purc::jacobian_reduced(pb, loaded.solution));
    } else if (args.method == "all" && pb.demand().is_single_od()) {
      try {
        results.emplace_back("reduced_laplacian", purc::jacobian_reduced(pb, loaded.solution));
      } catch (const purc::SingularSystemError& e) {
        reduced_skip_reason = e.what();
      }
    }
  }

  Json j;
  j["schema"] = "purc-jacobian-v1";
  j["manifest"] = purc::manifest_to_json(manifest);
  Json order = Json::array();
  for (Index e = 0; e < pb.link_count(); ++e) order.push_back(pb.network().link(e).id);
  j["link_order"] = order;
  j["genericity"] = Json{{"min_inactive_margin", generic.min_inactive_margin},
                         {"min_active_flow", generic.min_active_flow},
                         {"threshold", generic.threshold},
                         {"ok", generic.ok}};
  j["nullspace_dim"] = results.front().second.nullspace_dim;
  j["matrix"] = purc::matrix_to_json(results.front().second.full);
  Json methods = Json::object();
  for (const auto& [name, res] : results) {
    methods[name] = purc::matrix_to_json(res.full);
  }
  j["methods"] = methods;
  if (!reduced_skip_reason.empty()) {
    j["reduced_laplacian_skipped"] = reduced_skip_reason;
  }

  double max_disc = 0.0;
  Json pairs = Json::array();
  for (size_t a = 0; a < results.size(); ++a) {
    for (size_t b = a + 1; b < results.size(); ++b) {
      double d = (results[a].second.full - results[b].second.full).cwiseAbs().maxCoeff();
      max_disc = std::max(max_disc, d);
      pairs.push_back(Json{{"pair", results[a].first + "/" + results[b].first}, {"max_abs", d}});
    }
  }
  j["agreement"] = Json{{"max_discrepancy", max_disc}, {"pairs", pairs}};

  if (args.fd_check) {
    PhaseTimer t("fd-check");
    Eigen::MatrixXd fd = purc::finite_difference_jacobian(pb, args.fd_step);
    double d = (fd - results.front().second.full).cwiseAbs().maxCoeff();
    j["fd_check"] = Json{{"step", args.fd_step}, {"max_abs_error", d}};
  }

  purc::write_json_file(j, args.out);
  if (!args.export_csv.empty()) {
    export_jacobian_csv(pb, results.front().second.full, args.export_csv);
  }
  log_info("wrote " + args.out);
  return 0;
}

int cmd_respond(const std::string& solution_path, const std::string& dc_path,
                const std::string& out) {
  purc::LoadedSolution loaded = purc::load_solution_json(solution_path);
  const purc::Problem& pb = loaded.problem;
  Eigen::VectorXd dc = purc::read_link_values_csv(pb.network(), dc_path, "dc");
  Eigen::VectorXd dx = purc::directional_flow_response(pb, loaded.solution, dc);

  purc::Manifest manifest;
  manifest.input_hashes.emplace_back("solution", purc::file_hash_hex(solution_path));
  manifest.input_hashes.emplace_back("dc", purc::file_hash_hex(dc_path));

  Json j;
  j["schema"] = "purc-response-v1";
  j["manifest"] = purc::manifest_to_json(manifest);
  Json dflow = Json::object();
  for (Index e = 0; e < pb.link_count(); ++e) {
    dflow[pb.network().link(e).id] = dx[e];
  }
  j["dflow"] = dflow;
  purc::write_json_file(j, out);
  log_info("wrote " + out);
  return 0;
}

int cmd_check(const std::string& solution_path) {
  purc::LoadedSolution loaded = purc::load_solution_json(solution_path);
  auto failures = purc::check_solution(loaded.problem, loaded.solution);
  if (failures.empty()) {
    std::cout << "[OK] " << solution_path << ": all invariants hold\n";
    return 0;
  }
  for (const auto& f : failures) std::cout << "[FAIL] " << f << "\n";
  return kExitFailure;
}

bool verify_instance(const purc::Problem& pb, double tol, const std::string& label) {
  bool ok = true;
  auto check = [&](bool cond, const std::string& what, double value) {
    std::cout << (cond ? "[PASS] " : "[FAIL] ") << label << ": " << what << " = "
              << std::scientific << std::setprecision(3) << value << "\n";
    ok = ok && cond;
  };

  purc::SolverConfig config;
  config.grad_tol = tol;
  purc::DualReport newton = purc::solve_newton(pb, config);
  if (!newton.converged) {
    std::cout << "[FAIL] " << label << ": newton did not converge\n";
    return false;
  }
  purc::FlowSolution sol = purc::recover_flow(pb, newton.u_hat);
  check(std::abs(sol.primal_value - sol.dual_value) <= 1e-8, "duality gap",
        std::abs(sol.primal_value - sol.dual_value));
  check(sol.conservation_residual <= 1e-8, "conservation residual", sol.conservation_residual);

  purc::DualReport ascent = purc::solve_gradient_ascent(pb, config);
  if (ascent.converged) {
    purc::FlowSolution sol2 = purc::recover_flow(pb, ascent.u_hat);
    check((sol.flow - sol2.flow).cwiseAbs().maxCoeff() <= 1e-7, "method flow agreement",
          (sol.flow - sol2.flow).cwiseAbs().maxCoeff());
  } else {
    // First-order ascent can crawl on duals that are not strongly concave
    // (conjugate plateaus); that is a budget problem, not a wrong answer.
    std::cout << "[SKIP] " << label << ": gradient ascent hit its iteration budget\n";
  }

  if (pb.link_count() <= 16) {
    purc::BruteForceResult oracle = purc::brute_force_primal(pb);
    check((sol.flow - oracle.flow).cwiseAbs().maxCoeff() <= 1e-7, "oracle flow agreement",
          (sol.flow - oracle.flow).cwiseAbs().maxCoeff());
    check(std::abs(sol.primal_value - oracle.primal_value) <= 1e-8, "oracle value agreement",
          std::abs(sol.primal_value - oracle.primal_value));
  } else {
    std::cout << "[SKIP] " << label << ": brute force skipped (more than 16 links)\n";
  }
  return ok;
}

int cmd_verify(const SolveArgs& args, int random_instances, std::uint64_t seed) {
  bool ok = true;
  if (!args.network_path.empty()) {
    purc::NetworkFile nf = purc::read_network_csv(args.network_path);
    purc::Network net(nf.links);
    purc::Demand demand = make_demand(net, args);
    purc::Problem pb = purc::assemble_problem(nf, std::move(net), std::move(demand));
    ok = verify_instance(pb, args.tol, args.network_path) && ok;
  }
  purc::RandomProblemConfig rc;
  rc.min_nodes = 4;
  rc.max_nodes = 7;
  rc.min_links = 6;
  rc.max_links = 8;
  for (int i = 0; i < random_instances; ++i) {
    purc::Problem pb = purc::random_problem(seed + static_cast<std::uint64_t>(i), rc);
    ok = verify_instance(pb, args.tol, "random[" + std::to_string(i) + "]") && ok;
  }
  std::cout << (ok ? "verify: all checks passed\n" : "verify: FAILURES detected\n");
  return ok ? 0 : kExitFailure;
}

// The worked four-node, six-link example with half-quadratic links.
purc::Problem paper_problem() {
  std::vector<purc::Link> links = {{"1->2", "1", "2"}, {"1->3", "1", "3"}, {"2->3", "2", "3"},
                                   {"2->4", "2", "4"}, {"3->4", "3", "4"}, {"4->1", "4", "1"}};
  purc::Network net(links);
  purc::Demand demand = purc::Demand::single_od(net, "1", "4");
  Eigen::VectorXd costs(6);
  costs << 1.0, 2.0, 0.9, 2.0, 1.0, 1.0;
  std::vector<purc::PerturbationPtr> perts(6, purc::quadratic());
  purc::Problem pb(std::move(net), std::move(perts), std::move(costs), std::move(demand));
  pb.set_perturbation_specs(
      std::vector<purc::PerturbationSpec>(6, purc::PerturbationSpec{"quadratic", 1.0, 1.0}));
  return pb;
}

Eigen::MatrixXd paper_jacobian_reference() {
  Eigen::MatrixXd j(6, 6);
  j << -0.375, 0.375, -0.250, -0.125, 0.125, 0,  //
      0.375, -0.375, 0.250, 0.125, -0.125, 0,    //
      -0.250, 0.250, -0.500, 0.250, -0.250, 0,   //
      -0.125, 0.125, 0.250, -0.375, 0.375, 0,    //
      0.125, -0.125, -0.250, 0.375, -0.375, 0,   //
      0, 0, 0, 0, 0, 0;
  return j;
}

void report_delta(const std::string& what, double delta, double tol, bool* ok) {
  std::cout << "  " << std::left << std::setw(40) << what << " max delta " << std::scientific
            << std::setprecision(3) << delta << (delta <= tol ? "  ok" : "  EXCEEDS") << "\n";
  if (delta > tol) *ok = false;
}

int cmd_demo_paper(double tol) {
  purc::Problem pb = paper_problem();
  Eigen::VectorXd u_ref(3);
  u_ref << -4.0, -2.475, -1.525;
  Eigen::VectorXd x_ref(6);
  x_ref << 0.525, 0.475, 0.050, 0.475, 0.525, 0.0;

  std::cout << "four-node example: quadratic links, origin 1, destination 4\n";
  bool ok = true;

  purc::SolverConfig ascent_config;
  ascent_config.method = purc::SolveMethod::GradientAscent;
  ascent_config.fixed_step = 0.05;
  purc::DualReport ascent = purc::solve_gradient_ascent(pb, ascent_config);
  report_delta("potential (fixed-step ascent, a=0.05)",
               (ascent.u_hat - u_ref).cwiseAbs().maxCoeff(), tol, &ok);

  purc::DualReport newton = purc::solve_newton(pb);
  report_delta("potential (damped newton)", (newton.u_hat - u_ref).cwiseAbs().maxCoeff(), tol,
               &ok);
  std::cout << "  iterations: ascent " << ascent.iterations << ", newton " << newton.iterations
            << "\n";

  purc::FlowSolution sol = purc::recover_flow(pb, newton.u_hat);
  report_delta("recovered flow", (sol.flow - x_ref).cwiseAbs().maxCoeff(), tol, &ok);
  report_delta("duality gap", std::abs(sol.primal_value - sol.dual_value), tol, &ok);

  Eigen::MatrixXd jac_ref = paper_jacobian_reference();
  auto jn = purc::jacobian_nullspace(pb, sol);
  auto jl = purc::jacobian_laplacian(pb, sol);
  auto jr = purc::jacobian_reduced(pb, sol);
  report_delta("jacobian (nullspace form)", (jn.full - jac_ref).cwiseAbs().maxCoeff(), tol, &ok);
  report_delta("jacobian (laplacian form)", (jl.full - jac_ref).cwiseAbs().maxCoeff(), tol, &ok);
  report_delta("jacobian (reduced form)", (jr.full - jac_ref).cwiseAbs().maxCoeff(), tol, &ok);
  report_delta("cross-formula agreement", (jn.full - jl.full).cwiseAbs().maxCoeff(), 1e-9, &ok);

  std::cout << (ok ? "demo: all reference values reproduced\n" : "demo: MISMATCH\n");
  return ok ? 0 : kExitFailure;
}

int cmd_demo_two_link(double c1, double c2, double tol) {
  purc::Problem pb = purc::two_link_problem(c1, c2);
  purc::TwoLinkSolution closed = purc::two_link_closed_form(c1, c2);

  purc::SolverConfig config;
  config.grad_tol = 1e-12;
  purc::DualReport report = purc::solve_newton(pb, config);
  purc::FlowSolution sol = purc::recover_flow(pb, report.u_hat);

  std::cout << "two-link entropy network, costs (" << c1 << ", " << c2 << ")\n";
  std::cout << "  closed-form potential " << std::setprecision(12) << closed.potential
            << ", numeric " << report.u_hat[0] << "\n";
  std::cout << "  closed-form flow (" << closed.flow[0] << ", " << closed.flow[1] << ")\n";
  bool ok = true;
  report_delta("potential", std::abs(report.u_hat[0] - closed.potential), tol, &ok);
  Eigen::Vector2d flow_delta = sol.flow - Eigen::Vector2d(closed.flow);
  report_delta("flow", flow_delta.cwiseAbs().maxCoeff(), tol, &ok);
  auto jac = purc::jacobian_nullspace(pb, sol);
  report_delta("jacobian", (jac.full - closed.jacobian).cwiseAbs().maxCoeff(), tol, &ok);
  std::cout << (ok ? "demo: closed form reproduced\n" : "demo: MISMATCH\n");
  return ok ? 0 : kExitFailure;
}

int cmd_demo_circuit(double tol) {
  bool ok = true;
  {
    // Two parallel unit resistors: the current divider splits evenly.
    purc::Network net({{"top", "o", "d"}, {"bottom", "o", "d"}, {"back", "d", "o"}});
    purc::Demand demand = purc::Demand::single_od(net, "o", "d");
    Eigen::VectorXd resist(3);
    resist << 1.0, 1.0, 1e6;  // the return link barely conducts
    purc::CircuitSolution circuit = purc::circuit_solve(net, resist, demand);
    std::cout << "parallel resistors: potential at source " << std::setprecision(12)
              << circuit.potential[0] << ", currents (" << circuit.flow[0] << ", "
              << circuit.flow[1] << ")\n";
    report_delta("current split", std::abs(circuit.flow[0] - circuit.flow[1]), tol, &ok);
  }
  {
    // A reverse link: the circuit routes negative current through it, which
    // the traffic model forbids; half-quadratic links would pin it at zero.
    purc::Network net({{"fwd1", "o", "m"}, {"mid", "m", "d"}, {"rev", "d", "m"},
                       {"fwd2", "o", "d"}, {"back", "d", "o"}});
    purc::Demand demand = purc::Demand::single_od(net, "o", "d");
    Eigen::VectorXd resist = Eigen::VectorXd::Ones(5);
    purc::CircuitSolution circuit = purc::circuit_solve(net, resist, demand);
    std::cout << "five-link circuit currents:";
    for (Index e = 0; e < circuit.flow.size(); ++e) std::cout << " " << circuit.flow[e];
    std::cout << "\n";
    if (circuit.flow.minCoeff() >= 0.0) {
      std::cout << "  (all currents nonnegative on this instance)\n";
    } else {
      std::cout << "  some current runs against its link orientation, as circuits allow\n";
    }
  }
  std::cout << (ok ? "demo: circuit correspondence illustrated\n" : "demo: MISMATCH\n");
  return ok ? 0 : kExitFailure;
}

int cmd_validate_perturbation(const std::string& family, double beta, double gamma, double tol) {
  auto p = purc::make_perturbation(family, beta, gamma);
  auto report = purc::validate(*p, tol);
  std::cout << "perturbation " << p->name() << "\n";
  std::cout << "  max conjugacy residual: " << std::scientific << std::setprecision(3)
            << report.max_conjugacy_residual << "\n";
  std::cout << "  grad_conj monotone:     " << (report.monotone ? "yes" : "NO") << "\n";
  std::cout << "  grad_conj nonnegative:  " << (report.range_nonnegative ? "yes" : "NO") << "\n";
  std::cout << "  conjugate finite:       " << (report.conj_finite ? "yes" : "NO") << "\n";
  std::cout << "  superlinear growth:     " << (report.superlinear ? "yes" : "NO") << "\n";
  if (report.ok()) {
    std::cout << "validation passed\n";
    return 0;
  }
  for (const auto& issue : report.issues) {
    std::cout << "  violation: " << issue.check << " at " << issue.point << " (detail "
              << issue.detail << ")\n";
  }
  return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perturbed-utility route choice solver"};
  app.set_version_flag("--version", std::string("purc ") + purc::kVersion);
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Solve a traveler's problem from a network CSV");
  solve->add_option("--network", solve_args.network_path, "Link list CSV")->required();
  add_demand_options(solve, solve_args);
  solve->add_option("--method", solve_args.method, "newton|ascent|auto (default newton)");
  solve->add_option("--tol", solve_args.tol, "Gradient tolerance (default 1e-10)");
  solve->add_option("--alpha", solve_args.alpha,
                    "Fixed ascent step size (implies --method ascent)");
  solve->add_option("--max-iter", solve_args.max_iter, "Iteration budget override");
  solve->add_option("--out", solve_args.out, "Output JSON path (default solution.json)");
  solve->add_option("--export-csv", solve_args.export_csv,
                    "Also write <prefix>_flows.csv and <prefix>_potentials.csv");

  JacobianArgs jac_args;
  auto* jac = app.add_subcommand("jacobian", "Cost-flow Jacobian from a solved instance");
  jac->add_option("--solution", jac_args.solution_path, "solution.json from `purc solve`")
      ->required();
  jac->add_option("--method", jac_args.method, "nullspace|laplacian|reduced|all (default all)");
  jac->add_flag("--fd-check", jac_args.fd_check, "Compare against a finite-difference Jacobian");
  jac->add_option("--fd-step", jac_args.fd_step, "Finite-difference step (default 1e-5)");
  jac->add_option("--out", jac_args.out, "Output JSON path (default jacobian.json)");
  jac->add_option("--export-csv", jac_args.export_csv, "Also write <prefix>_jacobian.csv");

  std::string respond_solution, respond_dc, respond_out = "response.json";
  auto* respond =
      app.add_subcommand("respond", "Directional flow response to a cost perturbation");
  respond->add_option("--solution", respond_solution, "solution.json")->required();
  respond->add_option("--dc", respond_dc, "Cost perturbation CSV (link_id,dc)")->required();
  respond->add_option("--out", respond_out, "Output JSON path (default response.json)");

  std::string check_path;
  auto* check = app.add_subcommand("check", "Re-verify a solution file offline");
  check->add_option("solution", check_path, "solution.json")->required();

  SolveArgs verify_args;
  int verify_random = 0;
  std::uint64_t verify_seed = 42;
  auto* verify =
      app.add_subcommand("verify", "Compare the dual pipeline against ground-truth oracles");
  verify->add_option("--network", verify_args.network_path, "Link list CSV");
  add_demand_options(verify, verify_args);
  verify->add_option("--tol", verify_args.tol, "Gradient tolerance (default 1e-10)");
  verify->add_option("--random", verify_random, "Also verify N random small instances");
  verify->add_option("--seed", verify_seed, "Seed for the random instances (default 42)");

  std::string demo_example = "paper";
  double demo_c1 = 0.0, demo_c2 = 0.0, demo_tol = 1e-6;
  auto* demo = app.add_subcommand("demo", "Reproduce the worked examples with embedded data");
  demo->add_option("--example", demo_example, "paper|two-link|circuit (default paper)");
  demo->add_option("--c1", demo_c1, "First link cost for the two-link example");
  demo->add_option("--c2", demo_c2, "Second link cost for the two-link example");
  demo->add_option("--tol", demo_tol, "Reproduction tolerance (default 1e-6)");

  std::string vp_family;
  double vp_beta = 1.0, vp_gamma = 1.0, vp_tol = 1e-10;
  auto* vp =
      app.add_subcommand("validate-perturbation", "Numerically audit a perturbation family");
  vp->add_option("--family", vp_family, "quadratic|entropy|entropy_like|piecewise_quadratic")
      ->required();
  vp->add_option("--param1", vp_beta, "Scale beta (default 1)");
  vp->add_option("--param2", vp_gamma, "Scale gamma (default 1)");
  vp->add_option("--tol", vp_tol, "Audit tolerance (default 1e-10)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(solve_args);
    if (jac->parsed()) return cmd_jacobian(jac_args);
    if (respond->parsed()) return cmd_respond(respond_solution, respond_dc, respond_out);
    if (check->parsed()) return cmd_check(check_path);
    if (verify->parsed()) {
      if (verify_args.network_path.empty() && verify_random == 0) verify_random = 10;
      return cmd_verify(verify_args, verify_random, verify_seed);
    }
    if (demo->parsed()) {
      if (demo_example == "paper") return cmd_demo_paper(demo_tol);
      if (demo_example == "two-link") return cmd_demo_two_link(demo_c1, demo_c2, demo_tol);
      if (demo_example == "circuit") return cmd_demo_circuit(demo_tol);
      throw purc::ParseError("unknown demo example '" + demo_example + "'");
    }
    if (vp->parsed()) return cmd_validate_perturbation(vp_family, vp_beta, vp_gamma, vp_tol);
  } catch (const purc::ParseError& e) {
    std::cerr << "purc: parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const purc::ConnectivityError& e) {
    std::cerr << "purc: connectivity error: " << e.what() << "\n";
    return kExitConnectivity;
  } catch (const purc::ConvergenceError& e) {
    std::cerr << "purc: convergence error: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const purc::ValidationError& e) {
    std::cerr << "purc: validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const purc::GenericityError& e) {
    std::cerr << "purc: genericity error: " << e.what() << "\n";
    return kExitGenericity;
  } catch (const purc::SupportChangeError& e) {
    std::cerr << "purc: genericity error: " << e.what() << "\n";
    return kExitGenericity;
  } catch (const purc::DivergingDualError& e) {
    std::cerr << "purc: diverging dual: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "purc: error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
