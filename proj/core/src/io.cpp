#include "purc/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace purc {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, int line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
  }
}

void expect_header(const std::vector<std::string>& got, const std::vector<std::string>& want,
                   size_t required_prefix) {
  if (got.size() < required_prefix) {
    throw ParseError("malformed CSV header");
  }
  for (size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
    if (got[i] != want[i]) {
      throw ParseError("unexpected CSV column '" + got[i] + "' (expected '" + want[i] + "')");
    }
  }
}

}  // namespace

NetworkFile parse_network_csv(std::istream& in) {
  NetworkFile nf;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty network file");
  ++line_no;
  expect_header(split_csv_line(line),
                {"link_id", "from", "to", "cost", "perturbation", "param1", "param2"}, 4);

  std::vector<double> costs;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected at least 4 fields");
    }
    nf.links.push_back({f[0], f[1], f[2]});
    costs.push_back(parse_double(f[3], line_no, "cost"));
    PerturbationSpec spec;
    if (f.size() > 4 && !f[4].empty()) spec.family = f[4];
    if (f.size() > 5 && !f[5].empty()) spec.beta = parse_double(f[5], line_no, "param1");
    if (f.size() > 6 && !f[6].empty()) spec.gamma = parse_double(f[6], line_no, "param2");
    make_perturbation(spec);  // rejects unknown families and bad scales early
    nf.specs.push_back(std::move(spec));
  }
  if (nf.links.empty()) throw ParseError("network file has no links");
  nf.costs = Eigen::Map<Eigen::VectorXd>(costs.data(), static_cast<Index>(costs.size()));
  return nf;
}

NetworkFile read_network_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file '" + path + "'");
  return parse_network_csv(in);
}

Demand read_demand_csv(const Network& net, const std::string& path,
                       const std::optional<std::string>& reference) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open demand file '" + path + "'");
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty demand file");
  ++line_no;
  expect_header(split_csv_line(line), {"node", "b"}, 2);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(net.node_count());
  std::vector<bool> seen(static_cast<size_t>(net.node_count()), false);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 2) throw ParseError("line " + std::to_string(line_no) + ": expected node,b");
    Index v = net.node_index(f[0]);
    if (seen[static_cast<size_t>(v)]) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate node '" + f[0] + "'");
    }
    seen[static_cast<size_t>(v)] = true;
    b[v] = parse_double(f[1], line_no, "demand");
  }
  std::optional<Index> ref;
  if (reference) ref = net.node_index(*reference);
  return Demand::balanced(net, std::move(b), ref);
}

Eigen::VectorXd read_link_values_csv(const Network& net, const std::string& path,
                                     const std::string& column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file '" + path + "'");
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'");
  ++line_no;
  expect_header(split_csv_line(line), {"link_id", column}, 2);

  Eigen::VectorXd values = Eigen::VectorXd::Zero(net.link_count());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) + ": expected link_id," + column);
    }
    values[net.link_index(f[0])] = parse_double(f[1], line_no, column.c_str());
  }
  return values;
}

Problem assemble_problem(const NetworkFile& file, Network net, Demand demand) {
  std::vector<PerturbationPtr> perts;
  perts.reserve(file.specs.size());
  for (const auto& spec : file.specs) perts.push_back(make_perturbation(spec));
  Problem pb(std::move(net), std::move(perts), file.costs, std::move(demand));
  pb.set_perturbation_specs(file.specs);
  return pb;
}

std::string bytes_hash_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file '" + path + "' for hashing");
  std::ostringstream ss;
  ss << in.rdbuf();
  return bytes_hash_hex(ss.str());
}

Json manifest_to_json(const Manifest& manifest) {
  Json j;
  j["tool"] = "purc";
  j["version"] = manifest.tool_version;
  Json inputs = Json::object();
  for (const auto& [name, hash] : manifest.input_hashes) inputs[name] = hash;
  j["inputs"] = inputs;
  j["config"] = manifest.config;
  return j;
}

namespace {

Json problem_to_json(const Problem& problem) {
  if (!problem.perturbation_specs()) {
    throw ParseError("problem has no perturbation specs; cannot serialize");
  }
  const auto& specs = *problem.perturbation_specs();
  Json j;
  j["nodes"] = problem.network().node_ids();
  Json links = Json::array();
  for (Index e = 0; e < problem.link_count(); ++e) {
    const auto& l = problem.network().link(e);
    Json le;
    le["id"] = l.id;
    le["from"] = problem.network().node_id(l.tail);
    le["to"] = problem.network().node_id(l.head);
    le["cost"] = problem.costs()[e];
    le["perturbation"] = specs[static_cast<size_t>(e)].family;
    le["param1"] = specs[static_cast<size_t>(e)].beta;
    le["param2"] = specs[static_cast<size_t>(e)].gamma;
    links.push_back(le);
  }
  j["links"] = links;
  Json dj;
  if (problem.demand().is_single_od()) {
    dj["type"] = "single_od";
    dj["origin"] = problem.network().node_id(problem.demand().origin());
    dj["destination"] = problem.network().node_id(problem.demand().destination());
  } else {
    dj["type"] = "balanced";
    Json bv = Json::object();
    for (Index v = 0; v < problem.node_count(); ++v) {
      bv[problem.network().node_id(v)] = problem.demand().full_vector()[v];
    }
    dj["b"] = bv;
    dj["reference"] = problem.network().node_id(problem.demand().destination());
  }
  j["demand"] = dj;
  return j;
}

}  // namespace

Json solution_to_json(const Problem& problem, const DualReport& report,
                      const FlowSolution& solution, const Manifest& manifest) {
  Json j;
  j["schema"] = "purc-solution-v1";
  j["manifest"] = manifest_to_json(manifest);
  j["problem"] = problem_to_json(problem);

  Json s;
  s["method"] = to_string(report.method_used);
  s["converged"] = report.converged;
  s["iterations"] = report.iterations;
  s["final_grad_norm"] = report.final_grad_norm;
  Json potential = Json::object();
  const Index dest = problem.demand().destination();
  for (Index v = 0; v < problem.node_count(); ++v) {
    if (v == dest) {
      potential[problem.network().node_id(v)] = 0.0;
    } else {
      Index r = v < dest ? v : v - 1;
      potential[problem.network().node_id(v)] = solution.potential[r];
    }
  }
  s["potential"] = potential;
  Json flow = Json::object();
  for (Index e = 0; e < problem.link_count(); ++e) {
    flow[problem.network().link(e).id] = solution.flow[e];
  }
  s["flow"] = flow;
  s["primal_value"] = solution.primal_value;
  s["dual_value"] = solution.dual_value;
  s["duality_gap"] = solution.primal_value - solution.dual_value;
  Json active = Json::array();
  for (Index e : solution.active_set) active.push_back(problem.network().link(e).id);
  s["active_set"] = active;
  s["conservation_residual"] = solution.conservation_residual;
  j["solution"] = s;
  return j;
}

LoadedSolution load_solution_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open solution file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("bad JSON in '" + path + "': " + e.what());
  }
  if (!j.contains("schema") || j["schema"] != "purc-solution-v1") {
    throw ParseError("'" + path + "' is not a purc solution file");
  }

  NetworkFile nf;
  const Json& pj = j.at("problem");
  std::vector<double> costs;
  for (const auto& le : pj.at("links")) {
    nf.links.push_back({le.at("id"), le.at("from"), le.at("to")});
    costs.push_back(le.at("cost").get<double>());
    PerturbationSpec spec;
    spec.family = le.at("perturbation").get<std::string>();
    spec.beta = le.value("param1", 1.0);
    spec.gamma = le.value("param2", 1.0);
    nf.specs.push_back(std::move(spec));
  }
  nf.costs = Eigen::Map<Eigen::VectorXd>(costs.data(), static_cast<Index>(costs.size()));

  Network net(nf.links);
  const Json& dj = pj.at("demand");
  Demand demand = [&]() {
    if (dj.at("type") == "single_od") {
      return Demand::single_od(net, dj.at("origin"), dj.at("destination"));
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(net.node_count());
    for (const auto& [node, value] : dj.at("b").items()) {
      b[net.node_index(node)] = value.get<double>();
    }
    return Demand::balanced(net, std::move(b), net.node_index(dj.at("reference")));
  }();

  LoadedSolution loaded{assemble_problem(nf, std::move(net), std::move(demand)),
                        FlowSolution{},
                        "",
                        0,
                        j};
  const Problem& pb = loaded.problem;
  const Json& sj = j.at("solution");
  loaded.method = sj.at("method").get<std::string>();
  loaded.iterations = sj.at("iterations").get<int>();

  FlowSolution& sol = loaded.solution;
  sol.flow.resize(pb.link_count());
  for (Index e = 0; e < pb.link_count(); ++e) {
    sol.flow[e] = sj.at("flow").at(pb.network().link(e).id).get<double>();
  }
  sol.potential.resize(pb.reduced_dim());
  const Index dest = pb.demand().destination();
  for (Index v = 0; v < pb.node_count(); ++v) {
    if (v == dest) continue;
    Index r = v < dest ? v : v - 1;
    sol.potential[r] = sj.at("potential").at(pb.network().node_id(v)).get<double>();
  }
  sol.primal_value = sj.at("primal_value").get<double>();
  sol.dual_value = sj.at("dual_value").get<double>();
  sol.conservation_residual = sj.at("conservation_residual").get<double>();
  sol.grad_norm = sj.value("final_grad_norm", sol.conservation_residual);
  for (const auto& id : sj.at("active_set")) {
    sol.active_set.push_back(pb.network().link_index(id));
  }
  return loaded;
}

std::vector<std::string> check_solution(const Problem& problem, const FlowSolution& solution) {
  std::vector<std::string> failures;
  auto fail = [&failures](const std::string& msg) { failures.push_back(msg); };

  if (solution.flow.size() != problem.link_count() ||
      solution.potential.size() != problem.reduced_dim()) {
    fail("dimension mismatch between solution and problem");
    return failures;
  }
  if (solution.flow.minCoeff() < 0.0) fail("negative flow entry");

  Eigen::VectorXd residual =
      problem.reduced_demand() - problem.reduced_incidence() * solution.flow;
  double cons = residual.cwiseAbs().maxCoeff();
  if (cons > 1e-8) fail("conservation residual " + std::to_string(cons) + " exceeds 1e-8");

  for (Index e = 0; e < problem.link_count(); ++e) {
    double recovered = problem.perturbation(e).grad_conj(
        problem.tension(solution.potential, e) - problem.costs()[e]);
    if (std::abs(recovered - solution.flow[e]) > 1e-9 * std::max(1.0, std::abs(recovered))) {
      fail("flow on link '" + problem.network().link(e).id +
           "' does not match conjugate-gradient recovery");
    }
  }

  double p = primal_value(problem, solution.flow);
  if (std::abs(p - solution.primal_value) > 1e-9 * std::max(1.0, std::abs(p))) {
    fail("stored primal value differs from recomputation");
  }
  double pstar = dual_objective(problem, solution.potential);
  if (std::abs(pstar - solution.dual_value) > 1e-9 * std::max(1.0, std::abs(pstar))) {
    fail("stored dual value differs from recomputation");
  }
  if (std::abs(p - pstar) > 1e-8) {
    fail("duality gap " + std::to_string(p - pstar) + " exceeds 1e-8");
  }
  if (support(solution.flow) != solution.active_set) fail("active set is inconsistent with flow");
  return failures;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace purc
