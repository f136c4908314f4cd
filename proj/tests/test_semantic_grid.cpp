#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "semex/semantic_grid.hpp"

using namespace semex;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("uniform prior starts every cell at zero log-odds") {
  const SemanticGrid grid = SemanticGrid::uniform(4, 3, 0.25, 1);
  for (int cell = 0; cell < grid.size(); ++cell) {
    const Eigen::VectorXd y = grid.log_odds(cell);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
  }
}

TEST_CASE("skewed prior maps to log-odds against the free class") {
  const SemanticGrid grid(2, 2, 0.25, 1, vec2(0.9, 0.1));
  const Eigen::VectorXd y = grid.log_odds(0);
  CHECK(y[0] == 0.0);
  CHECK_THAT(y[1], Catch::Matchers::WithinAbs(std::log(1.0 / 9.0), 1e-12));
  CHECK_THAT(grid.class_probability(0, 0), Catch::Matchers::WithinAbs(0.9, 1e-12));
}

TEST_CASE("grid construction rejects bad configuration") {
  CHECK_THROWS_AS(SemanticGrid(4, 4, 0.0, 1, vec2(0.5, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(SemanticGrid(4, 4, -1.0, 1, vec2(0.5, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(SemanticGrid(4, 4, 0.25, 1, vec2(0.6, 0.6)), std::invalid_argument);
  CHECK_THROWS_AS(SemanticGrid(0, 4, 0.25, 1, vec2(0.5, 0.5)), std::invalid_argument);
  Eigen::VectorXd three(3);
  three << 0.2, 0.4, 0.4;
  CHECK_THROWS_AS(SemanticGrid(4, 4, 0.25, 1, three), std::invalid_argument);
}

TEST_CASE("class probabilities are the softmax of the cell log-odds") {
  SemanticGrid grid = SemanticGrid::uniform(2, 1, 0.25, 1);
  CHECK_THAT(grid.class_probability(0, 1), Catch::Matchers::WithinAbs(0.5, 1e-15));

  grid.set_log_odds(0, vec2(0.0, std::log(3.0)));
  CHECK_THAT(grid.class_probability(0, 1), Catch::Matchers::WithinAbs(0.75, 1e-12));

  grid.set_log_odds(1, vec2(0.0, -2.1972245773362196));
  CHECK_THAT(grid.class_probability(1, 0), Catch::Matchers::WithinAbs(0.9, 1e-6));

  CHECK_THROWS_AS(grid.class_probability(99, 0), std::out_of_range);
  CHECK_THROWS_AS(grid.class_probability(0, 2), std::out_of_range);
}

TEST_CASE("probabilities stay normalized for arbitrary cell states") {
  SemanticGrid grid = SemanticGrid::uniform(8, 8, 0.25, 3);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int cell = 0; cell < grid.size(); ++cell) {
    Eigen::VectorXd y(4);
    y << 0.0, u(rng), u(rng), u(rng);
    grid.set_log_odds(cell, y);
    CHECK_THAT(grid.class_probabilities(cell).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("update adds the increment relative to the prior") {
  SemanticGrid grid = SemanticGrid::uniform(1, 1, 0.25, 1);
  grid.update_cell(0, vec2(0.0, 1.0));
  CHECK(grid.log_odds(0)[1] == 1.0);

  // beta equal to the prior log-odds leaves the cell untouched
  SemanticGrid skewed(1, 1, 0.25, 1, vec2(1.0 / (1.0 + std::exp(0.5)),
                                          std::exp(0.5) / (1.0 + std::exp(0.5))));
  const Eigen::VectorXd before = skewed.log_odds(0);
  skewed.update_cell(0, vec2(0.0, skewed.prior_logodds()[1]));
  CHECK_THAT(skewed.log_odds(0)[1], Catch::Matchers::WithinAbs(before[1], 1e-15));
}

TEST_CASE("update followed by its mirror restores the cell") {
  SECTION("bit-exact from a uniform prior") {
    SemanticGrid grid = SemanticGrid::uniform(3, 3, 0.5, 2);
    Eigen::VectorXd beta(3);
    beta << 0.0, 1.25, -0.5;
    grid.update_cell(4, beta);
    grid.update_cell(4, -beta);  // 2 y0 - beta with y0 = 0
    CHECK(grid.log_odds(4)[1] == 0.0);
    CHECK(grid.log_odds(4)[2] == 0.0);
  }
  SECTION("to rounding precision over a skewed prior") {
    SemanticGrid grid(3, 3, 0.5, 2, [] {
      Eigen::VectorXd p(3);
      p << 0.5, 0.3, 0.2;
      return p;
    }());
    const Eigen::VectorXd y0 = grid.prior_logodds();
    const Eigen::VectorXd before = grid.log_odds(4);
    Eigen::VectorXd beta(3);
    beta << 0.0, 1.25, -0.5;
    grid.update_cell(4, beta);
    grid.update_cell(4, 2.0 * y0 - beta);
    const Eigen::VectorXd after = grid.log_odds(4);
    CHECK_THAT(after[1], Catch::Matchers::WithinAbs(before[1], 1e-14));
    CHECK_THAT(after[2], Catch::Matchers::WithinAbs(before[2], 1e-14));
  }
}

TEST_CASE("log-odds are clamped against overflow") {
  SemanticGrid grid = SemanticGrid::uniform(1, 1, 0.25, 1);
  for (int k = 0; k < 100; ++k) grid.update_cell(0, vec2(0.0, 10.0));
  CHECK(grid.log_odds(0)[1] == SemanticGrid::kLogOddsClamp);
  CHECK(std::isfinite(grid.class_probability(0, 1)));
}

TEST_CASE("axis-aligned traversal has one chord per crossed cell") {
  const SemanticGrid grid = SemanticGrid::uniform(10, 10, 0.25, 1);
  const RayTraversal tr = traverse_ray(grid, 0.25, 0.125, 0.0, 1.0);
  REQUIRE(tr.cells.size() == 4);
  double sum = 0.0;
  for (const auto& seg : tr.cells) {
    CHECK_THAT(seg.chord(), Catch::Matchers::WithinAbs(0.25, 1e-12));
    sum += seg.chord();
  }
  CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("diagonal traversal from a cell corner crosses full diagonals") {
  const SemanticGrid grid = SemanticGrid::uniform(10, 10, 0.25, 1);
  const double len = 2.0 * 0.25 * M_SQRT2;
  const RayTraversal tr = traverse_ray(grid, 0.25, 0.25, M_PI / 4.0, len);
  REQUIRE(tr.cells.size() == 2);
  for (const auto& seg : tr.cells)
    CHECK_THAT(seg.chord(), Catch::Matchers::WithinAbs(0.25 * M_SQRT2, 1e-12));
}

TEST_CASE("traversal edge cases") {
  const SemanticGrid grid = SemanticGrid::uniform(10, 10, 0.25, 1);

  SECTION("zero-length ray") {
    CHECK(traverse_ray(grid, 1.0, 1.0, 0.3, 0.0).empty());
  }
  SECTION("origin outside the grid") {
    CHECK_THROWS_AS(traverse_ray(grid, -0.1, 1.0, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(traverse_ray(grid, 1.0, 99.0, 0.0, 1.0), std::domain_error);
  }
  SECTION("ray clipped at the grid boundary") {
    const RayTraversal tr = traverse_ray(grid, 2.375, 1.125, 0.0, 100.0);
    REQUIRE_FALSE(tr.empty());
    CHECK_THAT(tr.cells.back().exit, Catch::Matchers::WithinAbs(2.5 - 2.375, 1e-9));
  }
}

TEST_CASE("traversal chords are ordered, contiguous and conserve length",
          "[property]") {
  const SemanticGrid grid = SemanticGrid::uniform(32, 24, 0.25, 1);
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> ux(0.01, 7.99), uy(0.01, 5.99);
  std::uniform_real_distribution<double> ua(-M_PI, M_PI), ur(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double ox = ux(rng), oy = uy(rng), angle = ua(rng), range = ur(rng);
    const RayTraversal tr = traverse_ray(grid, ox, oy, angle, range);
    double sum = 0.0;
    double prev_exit = 0.0;
    for (const auto& seg : tr.cells) {
      CHECK(seg.exit > seg.entry);
      CHECK_THAT(seg.entry, Catch::Matchers::WithinAbs(prev_exit, 1e-12));
      prev_exit = seg.exit;
      sum += seg.chord();
    }
    if (!tr.empty() && std::abs(tr.cells.back().exit - range) < 1e-12) {
      // ray ended inside the grid: chords must cover the full range
      CHECK_THAT(sum, Catch::Matchers::WithinAbs(range, 1e-9));
    }
  }
}

TEST_CASE("inverse observation structure") {
  const SemanticGrid grid = SemanticGrid::uniform(10, 1, 0.25, 2);
  const ObservationModel model;
  RayTraversal tr = traverse_ray(grid, 0.25, 0.125, 0.0, 0.75);
  REQUIRE(tr.cells.size() == 3);

  SECTION("hit in the last cell") {
    tr.hit = 2;
    const InverseObservation obs = inverse_observation(tr, 2, model, 2);
    REQUIRE(obs.updates.size() == 3);
    CHECK(obs.updates[0].beta[1] == -model.miss_logodds);
    CHECK(obs.updates[1].beta[2] == -model.miss_logodds);
    CHECK(obs.updates[2].beta[2] == model.hit_logodds);
    CHECK(obs.updates[2].beta[1] == 0.0);
    for (const auto& u : obs.updates) CHECK(u.beta[0] == 0.0);
  }
  SECTION("max-range miss marks everything free") {
    const InverseObservation obs = inverse_observation(tr, 0, model, 2);
    REQUIRE(obs.updates.size() == 3);
    for (const auto& u : obs.updates) {
      CHECK(u.beta[1] == -model.miss_logodds);
      CHECK(u.beta[2] == -model.miss_logodds);
    }
  }
  SECTION("invalid hit class") {
    tr.hit = 0;
    CHECK_THROWS_AS(inverse_observation(tr, 0, model, 2), std::invalid_argument);
    CHECK_THROWS_AS(inverse_observation(tr, 3, model, 2), std::invalid_argument);
  }
}

TEST_CASE("default hit increment crosses 0.99 within ten repeated hits") {
  // 10 * hit_logodds must beat log(0.99 C / 0.01) for the C classes used here
  const ObservationModel model;
  SemanticGrid grid = SemanticGrid::uniform(1, 1, 0.25, 3);
  for (int k = 0; k < 10; ++k) grid.update_cell(0, model.hit_beta(3, 2));
  CHECK(grid.class_probability(0, 2) > 0.99);
}

TEST_CASE("scan integration converges the hit cell to the observed class") {
  SemanticGrid grid = SemanticGrid::uniform(8, 3, 0.25, 2);
  const Pose2 pose(0.125, 0.375, 0.0);
  Scan scan{{0.0, 1.1, 2, true}};
  for (int k = 0; k < 12; ++k) integrate_scan(grid, pose, scan, {}, 2.0);
  const int hit_cell = grid.cell_at(1.05, 0.375);
  CHECK(grid.argmax_class(hit_cell) == 2);
  CHECK(grid.class_probability(hit_cell, 2) > 0.95);
  // pass-through cells converge to free
  CHECK(grid.argmax_class(grid.cell_at(0.6, 0.375)) == 0);
}

TEST_CASE("empty scan leaves the grid untouched") {
  SemanticGrid grid = SemanticGrid::uniform(4, 4, 0.25, 1);
  integrate_scan(grid, Pose2(0.5, 0.5, 0.0), {}, {}, 2.0);
  for (int cell = 0; cell < grid.size(); ++cell) CHECK(grid.at_prior(cell));
}

TEST_CASE("beam order never changes the integrated grid", "[property]") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ua(-M_PI, M_PI), ur(0.1, 2.0);
  std::uniform_int_distribution<int> uc(1, 2);
  for (int trial = 0; trial < 20; ++trial) {
    Scan scan;
    for (int b = 0; b < 12; ++b)
      scan.push_back({ua(rng), ur(rng), uc(rng), rng() % 4 != 0});
    Scan shuffled = scan;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    SemanticGrid a = SemanticGrid::uniform(12, 12, 0.25, 2);
    SemanticGrid b = SemanticGrid::uniform(12, 12, 0.25, 2);
    const Pose2 pose(1.5, 1.5, 0.4);
    integrate_scan(a, pose, scan, {}, 2.0);
    integrate_scan(b, pose, shuffled, {}, 2.0);
    for (int cell = 0; cell < a.size(); ++cell) {
      const Eigen::VectorXd ya = a.log_odds(cell), yb = b.log_odds(cell);
      REQUIRE(ya[1] == yb[1]);
      REQUIRE(ya[2] == yb[2]);
    }
  }
}

TEST_CASE("entropy of cells and maps") {
  SemanticGrid grid = SemanticGrid::uniform(2, 2, 0.25, 1);
  CHECK_THAT(grid.cell_entropy(0), Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
  CHECK_THAT(grid.map_entropy(), Catch::Matchers::WithinAbs(4.0 * std::log(2.0), 1e-12));

  grid.set_log_odds(0, vec2(0.0, -SemanticGrid::kLogOddsClamp));
  CHECK_THAT(grid.cell_entropy(0), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("confident observations never increase uniform-cell entropy") {
  SemanticGrid grid = SemanticGrid::uniform(10, 10, 0.25, 2);
  const double before = grid.map_entropy();
  Scan scan;
  for (int b = 0; b < 16; ++b) scan.push_back({b * 2.0 * M_PI / 16.0, 0.9, 1, true});
  integrate_scan(grid, Pose2(1.25, 1.25, 0.0), scan, {}, 2.0);
  CHECK(grid.map_entropy() <= before + 1e-9);
  for (int cell = 0; cell < grid.size(); ++cell)
    CHECK(grid.cell_entropy(cell) <= std::log(3.0) + 1e-12);
}
