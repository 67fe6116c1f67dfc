#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "mftraj/error.hpp"
#include "mftraj/proximity_graph.hpp"

using namespace mftraj;

namespace {

ProximityGraph graph_of(std::vector<Point> pts, double r) {
  return build_graph(pts, std::vector<bool>(pts.size(), true), r);
}

}  // namespace

TEST_CASE("build_graph examples") {
  const auto g = graph_of({Point(0, 0), Point(1, 0), Point(5, 0)}, 2.0);
  CHECK(g.adjacency(0, 1) == 1.0);
  CHECK(g.adjacency(1, 0) == 1.0);
  CHECK(g.adjacency(0, 2) == 0.0);
  CHECK(g.adjacency(1, 2) == 0.0);
  CHECK(g.adjacency.diagonal().isZero());

  const auto single = graph_of({Point(3, 4)}, 2.0);
  CHECK(single.adjacency.rows() == 1);
  CHECK(single.adjacency(0, 0) == 0.0);

  const auto twin = graph_of({Point(1, 1), Point(1, 1)}, 2.0);
  CHECK(twin.adjacency(0, 1) == kCoincidentDistance);
  CHECK(twin.binary_adjacency()(0, 1) == 1.0);

  // The radius itself is inside.
  CHECK(graph_of({Point(0, 0), Point(2, 0)}, 2.0).adjacency(0, 1) == 2.0);
}

TEST_CASE("build_graph errors") {
  const std::vector<Point> pts{Point(0, 0), Point(std::nan(""), 0)};
  CHECK_THROWS_AS(build_graph(pts, {true, true}, 2.0), InputError);
  CHECK_NOTHROW(build_graph(pts, {true, false}, 2.0));
  CHECK_THROWS(build_graph(pts, {true, true}, 0.0));
}

TEST_CASE("graph_series follows validity") {
  TrajectoryScene s;
  s.scene_id = "g";
  s.target.agent_id = "target";
  AgentHistory n;
  n.agent_id = "n";
  for (int f = 0; f < 20; ++f) {
    s.target.positions.push_back(Point(0, 0));
    s.target.observed.push_back(true);
    n.positions.push_back(f < 5 ? Point(std::nan(""), std::nan("")) : Point(3, 0));
    n.observed.push_back(f >= 5);
  }
  s.agents.push_back(n);
  const auto series = graph_series(s, 30.0);
  REQUIRE(series.size() == 20);
  for (int f = 0; f < 5; ++f) CHECK(series[static_cast<std::size_t>(f)].node_ids == std::vector<int>{0});
  for (int f = 5; f < 20; ++f) {
    CHECK(series[static_cast<std::size_t>(f)].node_ids == std::vector<int>{0, 1});
    CHECK(series[static_cast<std::size_t>(f)].adjacency == series[5].adjacency);
    CHECK(series[static_cast<std::size_t>(f)].frame == f);
  }
  CHECK(series[7].local_index(1) == 1);
  CHECK(!series[2].local_index(1).has_value());

  for (const auto& g : graph_series(s, 1.0)) CHECK(g.adjacency.isZero());
}

TEST_CASE("neighbor_set") {
  const auto path = graph_of({Point(0, 0), Point(1, 0), Point(2, 0)}, 1.0);
  CHECK(neighbor_set(path, 1) == std::vector<Eigen::Index>{0, 2});
  CHECK(neighbor_set(graph_of({Point(0, 0), Point(10, 0)}, 1.0), 0).empty());
  const auto k4 = graph_of({Point(0, 0), Point(1, 0), Point(0, 1), Point(1, 1)}, 5.0);
  CHECK(neighbor_set(k4, 2).size() == 3);
  CHECK_THROWS_AS(neighbor_set(k4, 4), BoundsError);
}

TEST_CASE("permutation equivariance, radius monotonicity and exact distances") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7;
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Point> permuted;
    for (int p : perm) permuted.push_back(pts[static_cast<std::size_t>(p)]);

    const auto g = graph_of(pts, 15.0);
    const auto gp = graph_of(permuted, 15.0);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) P(perm[static_cast<std::size_t>(i)], i) = 1.0;
    CHECK((P.transpose() * g.adjacency * P - gp.adjacency).cwiseAbs().maxCoeff() == 0.0);

    const auto wide = graph_of(pts, 25.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (g.adjacency(i, j) > 0) {
          CHECK(wide.adjacency(i, j) > 0);
          CHECK(g.adjacency(i, j) == (pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]).norm());
          CHECK(g.adjacency(i, j) <= 15.0);
        }
        CHECK(g.adjacency(i, j) == g.adjacency(j, i));
      }
  }
}

TEST_CASE("adjacency dump") {
  const auto g = graph_of({Point(0, 0), Point(1, 0), Point(5, 0)}, 2.0);
  std::ostringstream os;
  write_adjacency_csv(os, std::span(&g, 1));
  CHECK(os.str() == "frame,i,j,weight\n0,0,1,1\n0,1,0,1\n");
}
