#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "semex/config.hpp"
#include "semex/io.hpp"

using namespace semex;

TEST_CASE("config round-trips through its dump format losslessly") {
  RunConfig cfg;
  cfg.world = "worlds/loop.txt";
  cfg.method = "mi-only";
  cfg.seed = 424242;
  cfg.sensor_fov = 1.2345678901234567;
  cfg.gamma_lc = 3.75;
  cfg.odom_sigma_theta_deg = 0.123456789012345678;

  std::istringstream in(dump_config(cfg));
  RunConfig parsed;
  parse_config(parsed, in);
  CHECK(dump_config(parsed) == dump_config(cfg));
  CHECK(parsed.sensor_fov == cfg.sensor_fov);
  CHECK(parsed.seed == cfg.seed);
}

TEST_CASE("config rejects unknown keys and malformed values") {
  RunConfig cfg;
  CHECK_THROWS_AS(set_config_value(cfg, "no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(set_config_value(cfg, "steps", "abc"), std::invalid_argument);
  CHECK_THROWS_AS(set_config_value(cfg, "speed", "0.25x"), std::invalid_argument);
  std::istringstream bad("this is not a config\n");
  CHECK_THROWS_AS(parse_config(cfg, bad), std::invalid_argument);
}

TEST_CASE("method names parse") {
  CHECK(parse_method("full") == Method::full);
  CHECK(parse_method("mi-only") == Method::mi_only);
  CHECK(parse_method("nearest-frontier") == Method::nearest_frontier);
  CHECK_THROWS_AS(parse_method("greedy"), std::invalid_argument);
}

TEST_CASE("pose graph dump round-trips") {
  PoseGraph g;
  g.add_node(Pose2(0, 0, 0));
  g.add_node(Pose2(1.5, -0.25, 0.7));
  g.add_node(Pose2(2.0, 0.5, -1.1));
  Eigen::Matrix3d info;
  info << 4, 0.5, 0, 0.5, 3, 0.25, 0, 0.25, 2;
  g.add_odometry_edge(0, 1, Pose2(1.5, -0.25, 0.7), info);
  g.add_odometry_edge(1, 2, Pose2(0.6, 0.2, -1.8), info);
  g.add_loop_edge(0, 2, Pose2(2.0, 0.5, -1.1), info);

  std::istringstream in(dump_pose_graph(g));
  const PoseGraph parsed = parse_pose_graph(in);
  REQUIRE(parsed.num_nodes() == 3);
  REQUIRE(parsed.num_edges() == 3);
  CHECK(parsed.node(1).x == g.node(1).x);
  CHECK(parsed.edges()[2].kind == EdgeKind::loop);
  CHECK((parsed.edges()[0].info - info).cwiseAbs().maxCoeff() == 0.0);
  // a second dump is byte-identical
  CHECK(dump_pose_graph(parsed) == dump_pose_graph(g));
}

TEST_CASE("grid text dump round-trips the probabilities") {
  SemanticGrid grid = SemanticGrid::uniform(4, 3, 0.25, 2);
  Eigen::VectorXd y(3);
  y << 0.0, 1.25, -0.75;
  grid.set_log_odds(5, y);

  std::istringstream in(dump_grid_text(grid));
  const SemanticGrid parsed = parse_grid_text(in, 4, 3, 0.25, 2);
  for (int cell = 0; cell < grid.size(); ++cell) {
    const Eigen::VectorXd a = grid.class_probabilities(cell);
    const Eigen::VectorXd b = parsed.class_probabilities(cell);
    for (int c = 0; c < a.size(); ++c) CHECK_THAT(b[c], Catch::Matchers::WithinAbs(a[c], 1e-12));
  }
}

TEST_CASE("grid snapshots use the world palette verbatim") {
  SemanticGrid grid = SemanticGrid::uniform(2, 2, 0.25, 1);
  Eigen::VectorXd wall(2);
  wall << 0.0, 9.0;
  grid.set_log_odds(3, wall);
  const std::vector<WorldClass> palette{{'.', "free", {250, 250, 250}},
                                        {'#', "wall", {48, 48, 48}}};
  const Image img = grid_snapshot(grid, palette);
  CHECK(img.pixels[0] == palette[0].color);
  CHECK(img.pixels[3] == palette[1].color);

  const std::vector<WorldClass> short_palette{{'.', "free", {250, 250, 250}}};
  CHECK_THROWS_AS(grid_snapshot(grid, short_palette), std::invalid_argument);
}

TEST_CASE("steps csv round-trips") {
  RunLog log;
  log.steps.push_back({0, Pose2(0.1, 0.2, 0.3), Pose2(0.1, 0.25, 0.31), 10});
  log.steps.push_back({1, Pose2(0.2, 0.2, -0.3), Pose2(0.22, 0.21, -0.29), 25});
  const std::string csv = steps_csv(log, 0.25);
  std::istringstream in(csv);
  const RunLog parsed = parse_steps_csv(in);
  REQUIRE(parsed.steps.size() == 2);
  CHECK(parsed.steps[1].true_pose.x == log.steps[1].true_pose.x);
  CHECK(parsed.steps[1].explored_cells == 25);
  CHECK(steps_csv(parsed, 0.25) == csv);
}

TEST_CASE("double formatting is stable and shortest-exact") {
  CHECK(fmt_double(0.25) == "0.25");
  CHECK(fmt_double(1.0 / 3.0) == fmt_double(1.0 / 3.0));
  const double v = 0.1234567890123456789;
  CHECK(std::stod(fmt_double(v)) == v);
}
