#pragma once

#include <json.hpp>

#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "purc/dual_solver.hpp"
#include "purc/flow_recovery.hpp"
#include "purc/problem.hpp"
#include "purc/version.hpp"

namespace purc {

/// Insertion-ordered JSON keeps output bytes deterministic.
using Json = nlohmann::ordered_json;

/// Parsed link-list CSV: header
///   link_id,from,to,cost,perturbation,param1,param2
/// with perturbation and params optional per row (quadratic, 1, 1 defaults).
struct NetworkFile {
  std::vector<Link> links;
  Eigen::VectorXd costs;
  std::vector<PerturbationSpec> specs;
};

NetworkFile parse_network_csv(std::istream& in);
NetworkFile read_network_csv(const std::string& path);

/// Balanced-demand CSV with header `node,b`; unlisted nodes get zero.
/// `reference` picks the grounded node; defaults to the first node with
/// positive demand.
Demand read_demand_csv(const Network& net, const std::string& path,
                       const std::optional<std::string>& reference = std::nullopt);

/// Per-link value CSV (`link_id,<column>`), zero for unlisted links.
Eigen::VectorXd read_link_values_csv(const Network& net, const std::string& path,
                                     const std::string& column);

/// Builds the Problem a network file describes, attaching the perturbation
/// specs so solutions can be serialized and reloaded.
Problem assemble_problem(const NetworkFile& file, Network net, Demand demand);

/// 64-bit FNV-1a content hash, hex-encoded.
std::string bytes_hash_hex(const std::string& bytes);
std::string file_hash_hex(const std::string& path);

/// Reproducibility block embedded in every output file. Deliberately free of
/// wall-clock values so identical inputs and config give identical bytes.
struct Manifest {
  std::string tool_version = kVersion;
  std::vector<std::pair<std::string, std::string>> input_hashes;
  Json config = Json::object();
};

Json manifest_to_json(const Manifest& manifest);

Json solution_to_json(const Problem& problem, const DualReport& report,
                      const FlowSolution& solution, const Manifest& manifest);

struct LoadedSolution {
  Problem problem;
  FlowSolution solution;
  std::string method;
  int iterations = 0;
  Json raw;
};

LoadedSolution load_solution_json(const std::string& path);

/// Offline re-verification of a solution file: nonnegativity, conservation,
/// the link-by-link recovery identity, value recomputation, duality gap, and
/// active-set consistency. Returns human-readable failure lines; empty means
/// the solution checks out.
std::vector<std::string> check_solution(const Problem& problem, const FlowSolution& solution);

Json matrix_to_json(const Eigen::MatrixXd& m);
Json vector_to_json(const Eigen::VectorXd& v);

/// Serializes with two-space indentation and a trailing newline.
void write_json_file(const Json& j, const std::string& path);

}  // namespace purc
