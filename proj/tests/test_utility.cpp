#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "semex/planner.hpp"
#include "semex/pose_graph.hpp"
#include "semex/utility.hpp"

using namespace semex;

namespace {

LabelGrid open_space(int w, int h, double res = 0.25) {
  LabelGrid g{w, h, res, {}};
  g.labels.resize(g.size(), CellLabel::free);
  return g;
}

PlannedPath straight_path(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  PlannedPath p;
  p.waypoints = {from, to};
  p.length = (to - from).norm();
  return p;
}

/// Chain of nodes 0.5 m apart along +x, starting at the origin.
PoseGraph chain_graph(int nodes) {
  PoseGraph g;
  g.add_node(Pose2());
  for (int k = 1; k < nodes; ++k) {
    g.add_node(Pose2(0.5 * k, 0.0, 0.0));
    g.add_odometry_edge(k - 1, k, Pose2(0.5, 0.0, 0.0), Eigen::Matrix3d::Identity());
  }
  return g;
}

PathCandidate candidate(int id, double mi, double cost, double d_opt) {
  PathCandidate c;
  c.frontier_id = id;
  c.mi = mi;
  c.cost = cost;
  c.d_opt = d_opt;
  c.utility = shannon_renyi_utility(d_opt, mi, cost, 0.125);
  return c;
}

}  // namespace

TEST_CASE("poses along a path are spaced by arc length") {
  const PlannedPath path = straight_path({1.0, 1.0}, {3.0, 1.0});
  const auto poses = poses_along_path(path, Pose2(1.0, 1.0, 0.0), 0.5);
  REQUIRE(poses.size() == 4);
  for (std::size_t k = 0; k < poses.size(); ++k) {
    CHECK_THAT(poses[k].x, Catch::Matchers::WithinAbs(1.5 + 0.5 * k, 1e-12));
    CHECK_THAT(poses[k].y, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(poses[k].theta, Catch::Matchers::WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("hallucination extends the graph along the path") {
  const LabelGrid labels = open_space(48, 20);
  HallucinationConfig hc;  // spacing 0.5, radius 1.0, min separation 10

  SECTION("zero-length path adds nothing") {
    const PoseGraph g = chain_graph(12);
    const PoseGraph h = hallucinate_graph(g, PlannedPath{}, g.node(11), labels, hc);
    CHECK(h.num_nodes() == g.num_nodes());
    CHECK(h.num_edges() == g.num_edges());
  }
  SECTION("straight 2 m path away from history: 4 nodes, 4 odometry edges, 0 loops") {
    const PoseGraph g = chain_graph(12);  // nodes at x = 0 .. 5.5
    const Pose2 start = g.node(11);
    const PlannedPath path = straight_path({start.x, start.y}, {start.x + 2.0, start.y});
    const PoseGraph h = hallucinate_graph(g, path, start, labels, hc);
    CHECK(h.num_nodes() == g.num_nodes() + 4);
    CHECK(h.num_edges() == g.num_edges() + 4);
    for (const auto& e : h.edges()) CHECK(e.kind != EdgeKind::loop);
    CHECK(g.num_nodes() == 12);  // input untouched
  }
  SECTION("path returning near old nodes through free space predicts a loop") {
    const PoseGraph g = chain_graph(12);
    const Pose2 start = g.node(11);
    // head back toward the start of the chain; eligible old nodes are 0 and 1
    const PlannedPath path = straight_path({start.x, start.y}, {0.5, 0.0});
    const PoseGraph h = hallucinate_graph(g, path, start, labels, hc);
    int loops = 0;
    for (const auto& e : h.edges())
      if (e.kind == EdgeKind::loop) ++loops;
    CHECK(loops >= 1);
  }
  SECTION("recent nodes do not close trivial loops") {
    const PoseGraph g = chain_graph(12);
    const Pose2 start = g.node(11);
    // short hop forward stays within 1 m of nodes 10, 11 - both too recent
    const PlannedPath path = straight_path({start.x, start.y}, {start.x + 0.5, start.y});
    const PoseGraph h = hallucinate_graph(g, path, start, labels, hc);
    for (const auto& e : h.edges()) CHECK(e.kind != EdgeKind::loop);
  }
  SECTION("a wall between blocks the predicted loop") {
    LabelGrid walled = open_space(48, 20);
    for (int y = 0; y < 20; ++y)
      if (std::abs(y - 0) > 1)  // leave the chain's own row clear
        walled.labels[walled.index(6, y)] = CellLabel::occupied;
    // occupied column between old nodes and the path end at the same height
    for (int y = 0; y < 20; ++y) walled.labels[walled.index(6, y)] = CellLabel::occupied;
    const PoseGraph g = chain_graph(12);
    const Pose2 start = g.node(11);
    const PlannedPath path = straight_path({start.x, start.y}, {1.8, 0.0});
    const PoseGraph h = hallucinate_graph(g, path, start, walled, hc);
    // nodes land left of the wall but LOS to nodes 0/1 crosses x = 1.5..1.75?
    // wall at column 6 (x in [1.5, 1.75)) blocks any segment crossing it
    for (const auto& e : h.edges()) {
      if (e.kind != EdgeKind::loop) continue;
      const Pose2& a = h.node(e.i);
      const Pose2& b = h.node(e.j);
      const bool crosses = (a.x - 1.625) * (b.x - 1.625) < 0.0;
      CHECK_FALSE(crosses);
    }
  }
}

TEST_CASE("alpha discount") {
  CHECK(alpha(0.0, 5.0) == 1.0);
  CHECK_THAT(alpha(2.0, 1.0), Catch::Matchers::WithinAbs(3.0, 1e-15));
  const double guarded = alpha(3.0, 0.0);
  CHECK(std::isfinite(guarded));
  CHECK_THAT(guarded, Catch::Matchers::WithinRel(1.0 + 3.0 / 1e-9, 1e-12));
  CHECK_THROWS_AS(alpha(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("utility closed form") {
  CHECK_THAT(shannon_renyi_utility(3.0, 0.0, 2.0, 0.125), Catch::Matchers::WithinAbs(3.0, 1e-15));
  CHECK_THAT(shannon_renyi_utility(2.0, 1.0, 1.0, 0.125), Catch::Matchers::WithinAbs(4.0, 1e-15));
  // monotone: more information helps, more cost hurts
  CHECK(shannon_renyi_utility(2.0, 2.0, 1.0, 0.125) > shannon_renyi_utility(2.0, 1.0, 1.0, 0.125));
  CHECK(shannon_renyi_utility(2.0, 1.0, 2.0, 0.125) < shannon_renyi_utility(2.0, 1.0, 1.0, 0.125));
  CHECK_THROWS_AS(shannon_renyi_utility(-1.0, 1.0, 1.0, 0.125), std::invalid_argument);
}

TEST_CASE("printed and closed utility forms agree off the guards", "[property]") {
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> ud(0.0, 10.0), um(1e-4, 10.0), uc(0.2, 30.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double d = ud(rng), mi = um(rng), cost = uc(rng);
    const double closed = shannon_renyi_utility(d, mi, cost, 0.125);
    const double printed = shannon_renyi_utility_printed(d, mi, cost);
    CHECK_THAT(printed, Catch::Matchers::WithinRel(closed, 1e-12));
  }
}

TEST_CASE("action selection") {
  SECTION("empty list signals exploration complete") {
    CHECK_FALSE(select_action({}));
  }
  SECTION("single candidate wins") {
    const auto r = select_action({candidate(0, 1.0, 2.0, 1.0)});
    REQUIRE(r);
    CHECK(*r == 0);
  }
  SECTION("equal utilities break ties on cost, then frontier index") {
    // same mi/cost ratio so the utilities tie exactly
    auto a = candidate(0, 2.0, 5.0, 1.0);
    auto b = candidate(1, 1.2, 3.0, 1.0);
    b.utility = a.utility;  // force the tie
    const auto r = select_action({a, b});
    REQUIRE(r);
    CHECK(*r == 1);

    auto c = candidate(2, 1.2, 3.0, 1.0);
    c.utility = a.utility;
    const auto r2 = select_action({a, c, b});
    REQUIRE(r2);
    CHECK(*r2 == 2);  // equal cost: frontier id 1 (list index 2) wins
  }
  SECTION("zero-utility disconnected candidates never beat positive ones") {
    auto broken = candidate(0, 5.0, 1.0, 0.0);  // d_opt 0: disconnected graph
    auto ok = candidate(1, 0.1, 10.0, 0.5);
    REQUIRE(broken.utility == 0.0);
    const auto r = select_action({broken, ok});
    REQUIRE(r);
    CHECK(*r == 1);
  }
}

TEST_CASE("argmax is invariant under common d_opt scaling", "[property]") {
  std::mt19937 rng(303);
  std::uniform_real_distribution<double> ud(0.01, 5.0), um(0.0, 8.0), uc(0.3, 20.0);
  std::uniform_real_distribution<double> us(1e-3, 1e3);
  std::uniform_int_distribution<int> un(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = un(rng);
    std::vector<PathCandidate> base;
    for (int k = 0; k < n; ++k) base.push_back(candidate(k, um(rng), uc(rng), ud(rng)));
    const double scale = us(rng);
    std::vector<PathCandidate> scaled = base;
    for (auto& c : scaled) {
      c.d_opt *= scale;
      c.utility = shannon_renyi_utility(c.d_opt, c.mi, c.cost, 0.125);
    }
    const auto a = select_action(base);
    const auto b = select_action(scaled);
    REQUIRE(a);
    REQUIRE(b);
    REQUIRE(*a == *b);
  }
}

TEST_CASE("a predicted loop edge wins at equal information and cost") {
  const LabelGrid labels = open_space(48, 20);
  HallucinationConfig hc;
  const PoseGraph g = chain_graph(12);
  const Pose2 start = g.node(11);

  // same length, same (synthetic) information; one path returns to old nodes
  const PlannedPath away = straight_path({start.x, start.y}, {start.x + 2.0, start.y});
  const PlannedPath back = straight_path({start.x, start.y}, {start.x - 5.0 + 0.5, start.y});

  PathCandidate a;
  a.frontier_id = 0;
  a.path = away;
  a.cost = away.length;
  a.mi = 1.0;
  a.hallucinated = hallucinate_graph(g, away, start, labels, hc);
  a.d_opt = graph_d_opt(a.hallucinated, MatrixNorm::two, 2.0);
  a.utility = shannon_renyi_utility(a.d_opt, a.mi, a.cost, 0.125);

  PathCandidate b = a;
  b.frontier_id = 1;
  b.path = back;
  b.cost = away.length;  // equal by construction
  b.hallucinated = hallucinate_graph(g, back, start, labels, hc);
  b.d_opt = graph_d_opt(b.hallucinated, MatrixNorm::two, 2.0);
  b.utility = shannon_renyi_utility(b.d_opt, b.mi, b.cost, 0.125);

  int loops = 0;
  for (const auto& e : b.hallucinated.edges())
    if (e.kind == EdgeKind::loop) ++loops;
  REQUIRE(loops >= 1);
  CHECK(b.d_opt > a.d_opt);
  const auto r = select_action({a, b});
  REQUIRE(r);
  CHECK(*r == 1);
}
