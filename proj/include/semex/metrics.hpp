#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "semex/planner.hpp"
#include "semex/se2.hpp"
#include "semex/semantic_grid.hpp"
#include "semex/sim_world.hpp"

namespace semex {

/// Per-step record of a simulation run.
struct RunStep {
  int t = 0;
  Pose2 true_pose;
  Pose2 estimated_pose;
  int explored_cells = 0;
};

struct RunLog {
  std::vector<RunStep> steps;
};

/// Root-mean-square positional error after closed-form rigid alignment
/// (rotation + translation, no scale) of the estimate onto the truth.
inline double ate(const std::vector<Pose2>& estimated, const std::vector<Pose2>& truth) {
  if (estimated.size() != truth.size()) throw std::invalid_argument("ate: length mismatch");
  if (estimated.size() < 2) throw std::invalid_argument("ate: need at least two poses");

  const int n = static_cast<int>(estimated.size());
  Eigen::Vector2d mu_e = Eigen::Vector2d::Zero(), mu_t = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    mu_e += estimated[i].translation();
    mu_t += truth[i].translation();
  }
  mu_e /= n;
  mu_t /= n;

  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i)
    h += (estimated[i].translation() - mu_e) * (truth[i].translation() - mu_t).transpose();

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(1, 1) = -1.0;
  const Eigen::Matrix2d rot = svd.matrixV() * d * svd.matrixU().transpose();
  const Eigen::Vector2d trans = mu_t - rot * mu_e;

  double sq = 0.0;
  for (int i = 0; i < n; ++i)
    sq += (truth[i].translation() - (rot * estimated[i].translation() + trans)).squaredNorm();
  return std::sqrt(sq / n);
}

/// Mean Euclidean distance from each estimated-occupied cell center to the
/// nearest truly occupied cell center. Empty estimates are undefined, not 0.
inline std::optional<double> map_error(const LabelGrid& estimated, const GroundTruthWorld& world) {
  if (estimated.width != world.width() || estimated.height != world.height() ||
      estimated.resolution != world.resolution())
    throw std::invalid_argument("map_error: grids do not share geometry");

  std::vector<Eigen::Vector2d> truth;
  for (int iy = 0; iy < world.height(); ++iy)
    for (int ix = 0; ix < world.width(); ++ix)
      if (world.class_at(ix, iy) != 0)
        truth.push_back({(ix + 0.5) * world.resolution(), (iy + 0.5) * world.resolution()});

  double sum = 0.0;
  int count = 0;
  for (int iy = 0; iy < estimated.height; ++iy)
    for (int ix = 0; ix < estimated.width; ++ix) {
      if (estimated.at(ix, iy) != CellLabel::occupied) continue;
      const Eigen::Vector2d c{(ix + 0.5) * estimated.resolution, (iy + 0.5) * estimated.resolution};
      double best = std::numeric_limits<double>::infinity();
      for (const auto& t : truth) best = std::min(best, (t - c).norm());
      sum += best;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return sum / count;
}

/// Intersection over union of two cell-index sets (sorted vectors).
inline std::optional<double> iou_sets(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return std::nullopt;
  std::vector<int> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  const double uni = static_cast<double>(a.size() + b.size() - inter.size());
  return inter.size() / uni;
}

/// Per-class IoU between the argmax-labeled estimate and the truth, over
/// cells that have been observed (still-at-prior cells are excluded from
/// both sets). Undefined when the class appears in neither set.
inline std::optional<double> iou_per_class(const SemanticGrid& grid, const GroundTruthWorld& world,
                                           int c) {
  if (c < 1 || c > world.num_classes()) throw std::invalid_argument("iou class out of range");
  std::vector<int> est, truth;
  for (int cell = 0; cell < grid.size(); ++cell) {
    if (grid.at_prior(cell)) continue;
    if (grid.argmax_class(cell) == c) est.push_back(cell);
    if (world.class_at(cell) == c) truth.push_back(cell);
  }
  return iou_sets(est, truth);
}

/// Mean of the defined per-class IoU values.
inline std::optional<double> mean_iou(const SemanticGrid& grid, const GroundTruthWorld& world) {
  double sum = 0.0;
  int n = 0;
  for (int c = 1; c <= world.num_classes(); ++c) {
    if (const auto v = iou_per_class(grid, world, c)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

/// Explored area over time, (step index, m^2); non-decreasing by RunLog
/// construction.
inline std::vector<std::pair<int, double>> coverage_curve(const RunLog& log, double resolution) {
  std::vector<std::pair<int, double>> series;
  series.reserve(log.steps.size());
  for (const RunStep& s : log.steps)
    series.emplace_back(s.t, s.explored_cells * resolution * resolution);
  return series;
}

/// Cells the robot can ever observe: free cells reachable from the start
/// plus occupied cells adjacent to them. Denominator for coverage ratios.
inline int reachable_observable_cells(const GroundTruthWorld& world) {
  const int w = world.width(), h = world.height();
  std::vector<bool> reach(static_cast<std::size_t>(w) * h, false);
  const int start = world.cell_at(world.start().x, world.start().y);
  std::vector<int> stack{start};
  reach[start] = true;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    const int cx = cur % w, cy = cur / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
        const int ni = ny * w + nx;
        if (reach[ni] || world.occupied(ni)) continue;
        reach[ni] = true;
        stack.push_back(ni);
      }
  }
  int count = 0;
  for (int cell = 0; cell < w * h; ++cell) {
    if (reach[cell]) {
      ++count;
      continue;
    }
    if (!world.occupied(cell)) continue;
    const int cx = cell % w, cy = cell / w;
    bool adjacent = false;
    for (int dy = -1; dy <= 1 && !adjacent; ++dy)
      for (int dx = -1; dx <= 1 && !adjacent; ++dx) {
        const int nx = cx + dx, ny = cy + dy;
        if (nx >= 0 && nx < w && ny >= 0 && ny < h && reach[ny * w + nx]) adjacent = true;
      }
    if (adjacent) ++count;
  }
  return count;
}

/// First step index at which at least `target_cells` cells are explored, or
/// nullopt when the run never gets there.
inline std::optional<int> steps_to_coverage(const RunLog& log, int target_cells) {
  for (const RunStep& s : log.steps)
    if (s.explored_cells >= target_cells) return s.t;
  return std::nullopt;
}

}  // namespace semex
