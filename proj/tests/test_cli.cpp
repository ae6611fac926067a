#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const char* kPaperCsv =
    "link_id,from,to,cost,perturbation,param1,param2\n"
    "1->2,1,2,1.0,quadratic,,\n"
    "1->3,1,3,2.0,quadratic,,\n"
    "2->3,2,3,0.9,quadratic,,\n"
    "2->4,2,4,2.0,quadratic,,\n"
    "3->4,3,4,1.0,quadratic,,\n"
    "4->1,4,1,1.0,quadratic,,\n";

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("purc_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& content) const {
    fs::path p = dir / name;
    std::ofstream out(p);
    out << content;
    return p;
  }
  fs::path path(const std::string& name) const { return dir / name; }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(PURC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve writes the expected solution and passes check") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv", kPaperCsv);
  fs::path out = scratch.path("solution.json");

  int rc = run_cli("solve --network " + net.string() + " --origin 1 --destination 4 --out " +
                   out.string());
  REQUIRE(rc == 0);

  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["schema"] == "purc-solution-v1");
  CHECK(j["solution"]["converged"] == true);
  CHECK(std::abs(j["solution"]["potential"]["1"].get<double>() - (-4.0)) <= 1e-6);
  CHECK(std::abs(j["solution"]["potential"]["2"].get<double>() - (-2.475)) <= 1e-6);
  CHECK(std::abs(j["solution"]["potential"]["4"].get<double>()) == 0.0);
  CHECK(std::abs(j["solution"]["flow"]["1->2"].get<double>() - 0.525) <= 1e-6);
  CHECK(std::abs(j["solution"]["flow"]["4->1"].get<double>()) <= 1e-10);
  CHECK(j["solution"]["active_set"].size() == 5);
  CHECK(std::abs(j["solution"]["duality_gap"].get<double>()) <= 1e-8);

  CHECK(run_cli("check " + out.string()) == 0);
}

TEST_CASE("identical inputs produce byte-identical output") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv", kPaperCsv);
  fs::path out1 = scratch.path("a.json");
  fs::path out2 = scratch.path("b.json");
  std::string base = "solve --network " + net.string() + " --origin 1 --destination 4 --out ";
  REQUIRE(run_cli(base + out1.string()) == 0);
  REQUIRE(run_cli(base + out2.string()) == 0);
  CHECK(slurp(out1) == slurp(out2));
}

TEST_CASE("jacobian reproduces the known matrix with all methods agreeing") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv", kPaperCsv);
  fs::path sol = scratch.path("solution.json");
  fs::path jac = scratch.path("jacobian.json");
  REQUIRE(run_cli("solve --network " + net.string() + " --origin 1 --destination 4 --out " +
                  sol.string()) == 0);
  REQUIRE(run_cli("jacobian --solution " + sol.string() + " --method all --fd-check --out " +
                  jac.string()) == 0);

  auto j = nlohmann::json::parse(slurp(jac));
  CHECK(j["agreement"]["max_discrepancy"].get<double>() <= 1e-9);
  CHECK(j["fd_check"]["max_abs_error"].get<double>() <= 1e-5);
  CHECK(j["nullspace_dim"] == 2);
  Eigen::MatrixXd expected = testutil::paper_jacobian();
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      CHECK(std::abs(j["matrix"][r][c].get<double>() - expected(r, c)) <= 1e-6);
    }
  }
}

TEST_CASE("respond returns the matching jacobian column") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv", kPaperCsv);
  fs::path sol = scratch.path("solution.json");
  fs::path dc = scratch.write("dc.csv", "link_id,dc\n1->2,1.0\n");
  fs::path out = scratch.path("response.json");
  REQUIRE(run_cli("solve --network " + net.string() + " --origin 1 --destination 4 --out " +
                  sol.string()) == 0);
  REQUIRE(run_cli("respond --solution " + sol.string() + " --dc " + dc.string() + " --out " +
                  out.string()) == 0);
  auto j = nlohmann::json::parse(slurp(out));
  Eigen::MatrixXd expected = testutil::paper_jacobian();
  const char* ids[] = {"1->2", "1->3", "2->3", "2->4", "3->4", "4->1"};
  for (int e = 0; e < 6; ++e) {
    CHECK(std::abs(j["dflow"][ids[e]].get<double>() - expected(e, 0)) <= 1e-8);
  }
}

TEST_CASE("exit codes for the documented failure modes") {
  Scratch scratch;

  // 2: malformed CSV.
  fs::path bad = scratch.write("bad.csv", "link_id,from\nx,y\n");
  CHECK(run_cli("solve --network " + bad.string() + " --origin a --destination b") == 2);

  // 2: unknown node.
  fs::path net = scratch.write("net.csv", kPaperCsv);
  CHECK(run_cli("solve --network " + net.string() + " --origin 1 --destination zzz") == 2);

  // 3: not strongly connected.
  fs::path oneway = scratch.write("oneway.csv",
                                  "link_id,from,to,cost,perturbation,param1,param2\n"
                                  "e1,a,b,1.0,quadratic,,\n");
  CHECK(run_cli("solve --network " + oneway.string() + " --origin a --destination b") == 3);

  // 4: iteration budget too small.
  fs::path two = scratch.write("two.csv",
                               "link_id,from,to,cost,perturbation,param1,param2\n"
                               "e1,v1,v2,0.0,entropy,,\n"
                               "e2,v2,v1,0.0,entropy,,\n");
  CHECK(run_cli("solve --network " + two.string() +
                " --origin v1 --destination v2 --max-iter 1 --out " +
                scratch.path("nc.json").string()) == 4);

  // 2: bad perturbation family name.
  fs::path badfam = scratch.write("badfam.csv",
                                  "link_id,from,to,cost,perturbation,param1,param2\n"
                                  "e1,a,b,1.0,fancy,,\n"
                                  "e2,b,a,1.0,quadratic,,\n");
  CHECK(run_cli("solve --network " + badfam.string() + " --origin a --destination b") == 2);

  // 6: genericity guard on a boundary instance.
  fs::path boundary = scratch.write("boundary.csv",
                                    "link_id,from,to,cost,perturbation,param1,param2\n"
                                    "e1,o,d,0.0,quadratic,,\n"
                                    "e2,o,d,1.0,quadratic,,\n"
                                    "back,d,o,10.0,quadratic,,\n");
  fs::path bsol = scratch.path("bsol.json");
  REQUIRE(run_cli("solve --network " + boundary.string() + " --origin o --destination d --out " +
                  bsol.string()) == 0);
  CHECK(run_cli("jacobian --solution " + bsol.string()) == 6);
}

TEST_CASE("entropy networks solve to interior flows at tight tolerance") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv",
                               "link_id,from,to,cost,perturbation,param1,param2\n"
                               "1->2,1,2,1.0,entropy,,\n"
                               "1->3,1,3,2.0,entropy,,\n"
                               "2->3,2,3,0.9,entropy,,\n"
                               "2->4,2,4,2.0,entropy,,\n"
                               "3->4,3,4,1.0,entropy,,\n"
                               "4->1,4,1,1.0,entropy,,\n");
  fs::path out = scratch.path("solution.json");
  REQUIRE(run_cli("solve --network " + net.string() +
                  " --origin 1 --destination 4 --tol 1e-12 --out " + out.string()) == 0);
  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["solution"]["converged"] == true);
  for (const auto& [id, x] : j["solution"]["flow"].items()) {
    CHECK(x.get<double>() > 0.0);
  }
  CHECK(j["solution"]["active_set"].size() == 6);
}

TEST_CASE("csv export and scaled perturbation parameters round-trip") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv",
                               "link_id,from,to,cost,perturbation,param1,param2\n"
                               "e1,a,b,0.5,quadratic,2.0,1.5\n"
                               "e2,b,a,0.7,entropy_like,,\n");
  fs::path out = scratch.path("solution.json");
  REQUIRE(run_cli("solve --network " + net.string() + " --origin a --destination b --out " +
                  out.string() + " --export-csv " + (scratch.dir / "ex").string()) == 0);
  CHECK(fs::exists(scratch.path("ex_flows.csv")));
  CHECK(fs::exists(scratch.path("ex_potentials.csv")));

  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["problem"]["links"][0]["param1"] == 2.0);
  CHECK(j["problem"]["links"][0]["param2"] == 1.5);
  // Reloading through the jacobian command must reconstruct the same problem.
  CHECK(run_cli("jacobian --solution " + out.string() + " --out " +
                scratch.path("j.json").string()) == 0);
}

TEST_CASE("balanced demand files drive multi-origin problems") {
  Scratch scratch;
  fs::path net = scratch.write("net.csv",
                               "link_id,from,to,cost,perturbation,param1,param2\n"
                               "e1,a,b,0.5,quadratic,,\n"
                               "e2,b,c,0.5,quadratic,,\n"
                               "e3,c,a,0.5,quadratic,,\n"
                               "e4,b,a,0.8,quadratic,,\n"
                               "e5,c,b,0.8,quadratic,,\n"
                               "e6,a,c,0.8,quadratic,,\n");
  fs::path dm = scratch.write("demand.csv", "node,b\na,-1.0\nb,-0.5\nc,1.5\n");
  fs::path out = scratch.path("solution.json");
  REQUIRE(run_cli("solve --network " + net.string() + " --demand " + dm.string() + " --out " +
                  out.string()) == 0);
  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["problem"]["demand"]["type"] == "balanced");
  CHECK(j["problem"]["demand"]["reference"] == "c");
  CHECK(std::abs(j["solution"]["conservation_residual"].get<double>()) <= 1e-8);
  CHECK(run_cli("check " + out.string()) == 0);

  // The reduced-Laplacian form is single-OD only; asking for it explicitly
  // on balanced demand is a usage error, while `all` just skips it.
  CHECK(run_cli("jacobian --solution " + out.string() + " --method reduced --out " +
                scratch.path("jr.json").string()) == 2);
  CHECK(run_cli("jacobian --solution " + out.string() + " --method all --out " +
                scratch.path("ja.json").string()) == 0);
}

TEST_CASE("detached circulation downgrades the reduced form gracefully") {
  Scratch scratch;
  fs::path net = scratch.write("circ.csv",
                               "link_id,from,to,cost,perturbation,param1,param2\n"
                               "e1,o,d,0.5,quadratic,,\n"
                               "e2,d,o,10.0,quadratic,,\n"
                               "e3,m1,m2,-1.0,quadratic,,\n"
                               "e4,m2,m1,-1.0,quadratic,,\n"
                               "e5,o,m1,10.0,quadratic,,\n"
                               "e6,m2,d,10.0,quadratic,,\n");
  fs::path sol = scratch.path("sol.json");
  REQUIRE(run_cli("solve --network " + net.string() + " --origin o --destination d --out " +
                  sol.string()) == 0);
  // `all` skips the inapplicable reduced form with a note; asking for it
  // explicitly fails.
  fs::path jac = scratch.path("jac.json");
  REQUIRE(run_cli("jacobian --solution " + sol.string() + " --method all --out " +
                  jac.string()) == 0);
  auto j = nlohmann::json::parse(slurp(jac));
  CHECK(j.contains("reduced_laplacian_skipped"));
  CHECK(j["agreement"]["max_discrepancy"].get<double>() <= 1e-9);
  CHECK(run_cli("jacobian --solution " + sol.string() + " --method reduced --out " +
                scratch.path("jr.json").string()) == 1);
}

TEST_CASE("demo and verify subcommands succeed") {
  Scratch scratch;
  CHECK(run_cli("demo") == 0);
  CHECK(run_cli("demo --example two-link --c1 1 --c2 1") == 0);
  CHECK(run_cli("demo --example circuit") == 0);
  fs::path net = scratch.write("net.csv", kPaperCsv);
  CHECK(run_cli("verify --network " + net.string() + " --origin 1 --destination 4") == 0);
  CHECK(run_cli("verify --random 3 --seed 11") == 0);
}

TEST_CASE("validate-perturbation audits the builtin families") {
  CHECK(run_cli("validate-perturbation --family quadratic") == 0);
  CHECK(run_cli("validate-perturbation --family entropy_like --param1 2.0 --param2 0.5") == 0);
  CHECK(run_cli("validate-perturbation --family nope") == 2);
}

}  // TEST_SUITE
