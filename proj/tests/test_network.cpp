#include <doctest.h>

#include <Eigen/SVD>

#include "purc/network.hpp"
#include "purc/oracle.hpp"
#include "test_util.hpp"

using namespace purc;

TEST_SUITE("network") {

TEST_CASE("four-node example incidence matrix matches the known layout") {
  Problem pb = testutil::paper_problem();
  Eigen::MatrixXd expected(4, 6);
  expected << -1, -1, 0, 0, 0, 1,  //
      1, 0, -1, -1, 0, 0,          //
      0, 1, 1, 0, -1, 0,           //
      0, 0, 0, 1, 1, -1;
  CHECK((pb.incidence().full_dense() - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single link forces the sign pattern") {
  Network net({{"e1", "v1", "v2"}});
  Incidence inc = build_incidence(net);
  Eigen::MatrixXd m = inc.full_dense();
  CHECK(m(0, 0) == -1.0);
  CHECK(m(1, 0) == +1.0);
}

TEST_CASE("antiparallel links get mirrored columns") {
  Network net({{"e1", "v1", "v2"}, {"e2", "v2", "v1"}});
  Eigen::MatrixXd m = build_incidence(net).full_dense();
  CHECK(m.col(0).isApprox(Eigen::Vector2d(-1, 1)));
  CHECK(m.col(1).isApprox(Eigen::Vector2d(1, -1)));
}

TEST_CASE("reduce drops the destination row") {
  Problem pb = testutil::paper_problem();
  Incidence inc(pb.network());
  Demand demand = Demand::single_od(pb.network(), "1", "4");
  ReducedSystem rs = reduce(inc, demand);
  CHECK(rs.matrix.rows() == 3);
  CHECK(Eigen::MatrixXd(rs.matrix).isApprox(inc.full_dense().topRows(3)));
  CHECK(rs.demand.isApprox(Eigen::Vector3d(-1, 0, 0)));

  Network two({{"e1", "v1", "v2"}, {"e2", "v2", "v1"}});
  ReducedSystem rs2 = reduce(build_incidence(two), Demand::single_od(two, "v1", "v2"));
  CHECK(rs2.matrix.rows() == 1);
  CHECK(rs2.matrix.cols() == 2);
}

TEST_CASE("full and reduced systems agree on path flows") {
  // Path-constructed feasible flows satisfy both systems exactly; adding a
  // circulation preserves both.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Problem pb = random_problem(seed);
    const Network& net = pb.network();
    Index o = pb.demand().origin();
    Index d = pb.demand().destination();
    Eigen::VectorXd x = positive_path_flow(net, o, d);
    Eigen::VectorXd circulation = positive_path_flow(net, o, d) + positive_path_flow(net, d, o);

    Eigen::MatrixXd full = pb.incidence().full_dense();
    Eigen::MatrixXd reduced(pb.reduced_incidence());
    Eigen::VectorXd b_full = pb.demand().full_vector();
    Eigen::VectorXd b = pb.reduced_demand();

    CHECK((full * x - b_full).cwiseAbs().maxCoeff() == 0.0);
    CHECK((reduced * x - b).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd y = x + circulation;
    CHECK((full * y - b_full).cwiseAbs().maxCoeff() == 0.0);
    CHECK((reduced * y - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("strong connectivity") {
  CHECK(is_strongly_connected(testutil::paper_problem().network()));
  Network one_way({{"e1", "v1", "v2"}});
  CHECK_FALSE(is_strongly_connected(one_way));
  CHECK(find_unreachable_pair(one_way).has_value());
  Network two_way({{"e1", "v1", "v2"}, {"e2", "v2", "v1"}});
  CHECK(is_strongly_connected(two_way));
}

TEST_CASE("positive path flow is a conservation witness") {
  Problem pb = testutil::paper_problem();
  Eigen::VectorXd x = positive_path_flow(pb.network(), 0, 3);
  CHECK((x.array() >= 0.0).all());
  CHECK((Eigen::MatrixXd(pb.reduced_incidence()) * x - pb.reduced_demand())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  for (Index e = 0; e < x.size(); ++e) CHECK(x[e] == std::floor(x[e]));

  CHECK_THROWS_AS(positive_path_flow(pb.network(), 2, 2), ParseError);

  Network two({{"e1", "v1", "v2"}, {"e2", "v2", "v1"}});
  Eigen::VectorXd unique_path = positive_path_flow(two, 0, 1);
  CHECK(unique_path.isApprox(Eigen::Vector2d(1, 0)));
}

TEST_CASE("column sums vanish and the reduced matrix has full row rank") {
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    Problem pb = random_problem(seed);
    Eigen::MatrixXd full = pb.incidence().full_dense();
    CHECK(full.colwise().sum().cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd reduced(pb.reduced_incidence());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(reduced);
    Index rank = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()[i] > 1e-10) ++rank;
    }
    CHECK(rank == pb.node_count() - 1);
  }
}

TEST_CASE("appending the negated row sum restores the full matrix") {
  Problem pb = testutil::paper_problem();
  Eigen::MatrixXd reduced(pb.reduced_incidence());
  Eigen::MatrixXd restored(pb.node_count(), pb.link_count());
  Index dest = pb.demand().destination();
  Index r = 0;
  for (Index v = 0; v < pb.node_count(); ++v) {
    if (v == dest) {
      restored.row(v) = -reduced.colwise().sum();
    } else {
      restored.row(v) = reduced.row(r++);
    }
  }
  CHECK(restored.isApprox(pb.incidence().full_dense()));
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(Network({{"e1", "a", "a"}}), ParseError);  // self-loop
  CHECK_THROWS_AS(Network({{"e1", "a", "b"}, {"e1", "b", "a"}}), ParseError);  // dup id
  CHECK_NOTHROW(Network({{"e1", "a", "b"}, {"e2", "a", "b"}}));  // parallel ok

  Network net({{"e1", "a", "b"}, {"e2", "b", "a"}});
  CHECK_THROWS_AS(Demand::single_od(net, "a", "zzz"), ParseError);
  CHECK_THROWS_AS(Demand::single_od(net, "a", "a"), ParseError);

  Eigen::VectorXd unbalanced(2);
  unbalanced << -1.0, 0.5;
  CHECK_THROWS_AS(Demand::balanced(net, unbalanced), ParseError);

  Eigen::VectorXd balanced(2);
  balanced << -2.0, 2.0;
  Demand dm = Demand::balanced(net, balanced);
  CHECK(dm.destination() == 1);  // first node with positive demand
  CHECK(dm.reduced_vector().size() == 1);
  CHECK(dm.reduced_vector()[0] == -2.0);
}

TEST_CASE("incidence column accessor matches the dense column") {
  Problem pb = testutil::paper_problem();
  for (Index e = 0; e < pb.link_count(); ++e) {
    CHECK(pb.incidence().column(e).isApprox(pb.incidence().full_dense().col(e)));
  }
}

}  // TEST_SUITE
