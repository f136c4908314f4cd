#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "semex/semantic_grid.hpp"

namespace semex {

enum class CellLabel : unsigned char { free, occupied, unknown };

struct LabelThresholds {
  double free_threshold = 0.6;
  double occ_threshold = 0.6;
};

/// Per-cell planning labels. Cells with row-major index i map 1:1 to grid
/// cells; width/height mirror the source grid.
struct LabelGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  std::vector<CellLabel> labels;

  int size() const { return width * height; }
  bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < width && iy >= 0 && iy < height; }
  int index(int ix, int iy) const { return iy * width + ix; }
  CellLabel at(int ix, int iy) const { return labels[index(ix, iy)]; }
};

/// Projects the multi-class posterior to planning labels: free when the free
/// class clears its threshold, occupied when any semantic class does, else
/// unknown.
inline LabelGrid classify_cells(const SemanticGrid& grid, const LabelThresholds& t = {}) {
  LabelGrid out{grid.width(), grid.height(), grid.resolution(), {}};
  out.labels.resize(grid.size(), CellLabel::unknown);
  for (int i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd p = grid.class_probabilities(i);
    if (p[0] > t.free_threshold) {
      out.labels[i] = CellLabel::free;
    } else {
      double occ = 0.0;
      for (int c = 1; c < p.size(); ++c) occ = std::max(occ, p[c]);
      if (occ > t.occ_threshold) out.labels[i] = CellLabel::occupied;
    }
  }
  return out;
}

/// Cluster of free cells bordering unknown space.
struct Frontier {
  std::vector<int> cells;        // row-major grid indices, sorted
  Eigen::Vector2d centroid;      // metric mean of member cell centers
  int goal_cell = -1;            // centroid snapped to a free cell
  int size() const { return static_cast<int>(cells.size()); }
};

namespace detail {

inline bool borders_unknown(const LabelGrid& g, int ix, int iy) {
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      if (g.in_bounds(ix + dx, iy + dy) && g.at(ix + dx, iy + dy) == CellLabel::unknown)
        return true;
    }
  return false;
}

}  // namespace detail

/// Frontier cells are free cells 8-adjacent to unknown space; frontiers are
/// their 8-connected components of at least `min_size` cells. Ordering is
/// deterministic: size descending, then first (row-major) cell.
inline std::vector<Frontier> detect_frontiers(const LabelGrid& g, int min_size = 3) {
  std::vector<bool> is_frontier(g.size(), false);
  for (int iy = 0; iy < g.height; ++iy)
    for (int ix = 0; ix < g.width; ++ix)
      if (g.at(ix, iy) == CellLabel::free && detail::borders_unknown(g, ix, iy))
        is_frontier[g.index(ix, iy)] = true;

  std::vector<Frontier> frontiers;
  std::vector<bool> visited(g.size(), false);
  for (int start = 0; start < g.size(); ++start) {
    if (!is_frontier[start] || visited[start]) continue;
    Frontier f;
    std::vector<int> stack{start};
    visited[start] = true;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      f.cells.push_back(cur);
      const int cx = cur % g.width, cy = cur / g.width;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = cx + dx, ny = cy + dy;
          if (!g.in_bounds(nx, ny)) continue;
          const int ni = g.index(nx, ny);
          if (is_frontier[ni] && !visited[ni]) {
            visited[ni] = true;
            stack.push_back(ni);
          }
        }
    }
    if (static_cast<int>(f.cells.size()) < min_size) continue;
    std::sort(f.cells.begin(), f.cells.end());

    f.centroid.setZero();
    for (int c : f.cells)
      f.centroid += Eigen::Vector2d{(c % g.width + 0.5) * g.resolution,
                                    (c / g.width + 0.5) * g.resolution};
    f.centroid /= static_cast<double>(f.cells.size());

    // goal: free cell nearest the centroid within the cluster bounding box
    int min_x = g.width, max_x = -1, min_y = g.height, max_y = -1;
    for (int c : f.cells) {
      min_x = std::min(min_x, c % g.width);
      max_x = std::max(max_x, c % g.width);
      min_y = std::min(min_y, c / g.width);
      max_y = std::max(max_y, c / g.width);
    }
    double best = std::numeric_limits<double>::infinity();
    for (int iy = min_y; iy <= max_y; ++iy)
      for (int ix = min_x; ix <= max_x; ++ix) {
        if (g.at(ix, iy) != CellLabel::free) continue;
        const Eigen::Vector2d center{(ix + 0.5) * g.resolution, (iy + 0.5) * g.resolution};
        const double d = (center - f.centroid).squaredNorm();
        if (d < best) {
          best = d;
          f.goal_cell = g.index(ix, iy);
        }
      }
    if (f.goal_cell < 0) continue;  // no free cell in the box; degenerate cluster
    frontiers.push_back(std::move(f));
  }

  std::sort(frontiers.begin(), frontiers.end(), [](const Frontier& a, const Frontier& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.cells.front() < b.cells.front();
  });
  return frontiers;
}

/// Metric waypoint path from A*.
struct PlannedPath {
  std::vector<Eigen::Vector2d> waypoints;
  double length = 0.0;
};

/// 8-connected A* over the label grid with Euclidean heuristic and sqrt(2)
/// diagonal cost. Unknown cells are untraversable; occupied cells are
/// inflated by `clearance` cells. Ties break on smaller heuristic, then
/// row-major order, so identical labels give identical paths. The start cell
/// is always traversable (the robot is there).
inline std::optional<PlannedPath> astar(const LabelGrid& g, int start, int goal,
                                        int clearance = 1) {
  if (start < 0 || start >= g.size() || goal < 0 || goal >= g.size())
    throw std::out_of_range("astar endpoint out of range");

  std::vector<bool> blocked(g.size(), false);
  for (int i = 0; i < g.size(); ++i) {
    if (g.labels[i] == CellLabel::unknown) blocked[i] = true;
    if (g.labels[i] == CellLabel::occupied) {
      const int cx = i % g.width, cy = i / g.width;
      for (int dy = -clearance; dy <= clearance; ++dy)
        for (int dx = -clearance; dx <= clearance; ++dx)
          if (g.in_bounds(cx + dx, cy + dy)) blocked[g.index(cx + dx, cy + dy)] = true;
    }
  }
  blocked[start] = false;
  if (blocked[goal]) return std::nullopt;

  const double res = g.resolution;
  auto heuristic = [&](int c) {
    const double dx = (c % g.width - goal % g.width) * res;
    const double dy = (c / g.width - goal / g.width) * res;
    return std::hypot(dx, dy);
  };

  struct Entry {
    double f, h;
    int cell;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return cell > o.cell;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
  std::vector<int> parent(g.size(), -1);
  dist[start] = 0.0;
  open.push({heuristic(start), heuristic(start), start});

  const int off_x[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int off_y[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double step[8] = {res, res, res, res, res * M_SQRT2, res * M_SQRT2, res * M_SQRT2,
                          res * M_SQRT2};

  bool found = false;
  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    if (top.cell == goal) {
      found = true;
      break;
    }
    if (top.f > dist[top.cell] + heuristic(top.cell) + 1e-12) continue;  // stale
    const int cx = top.cell % g.width, cy = top.cell / g.width;
    for (int k = 0; k < 8; ++k) {
      const int nx = cx + off_x[k], ny = cy + off_y[k];
      if (!g.in_bounds(nx, ny)) continue;
      const int ni = g.index(nx, ny);
      if (blocked[ni]) continue;
      const double nd = dist[top.cell] + step[k];
      if (nd < dist[ni] - 1e-15) {
        dist[ni] = nd;
        parent[ni] = top.cell;
        open.push({nd + heuristic(ni), heuristic(ni), ni});
      }
    }
  }
  if (!found) return std::nullopt;

  PlannedPath path;
  std::vector<int> cells;
  for (int c = goal; c != -1; c = parent[c]) cells.push_back(c);
  std::reverse(cells.begin(), cells.end());
  path.waypoints.reserve(cells.size());
  for (int c : cells)
    path.waypoints.push_back({(c % g.width + 0.5) * res, (c / g.width + 0.5) * res});
  path.length = dist[goal];
  return path;
}

/// Goals that could not be reached. Entries never expire within a run unless
/// an expiry replan count is configured.
class Blacklist {
 public:
  explicit Blacklist(double merge_radius, int expire_after_replans = 0)
      : merge_radius_(merge_radius), expire_after_(expire_after_replans) {}

  void add(const Eigen::Vector2d& goal, int replan_index) {
    entries_.push_back({goal, replan_index});
  }

  bool contains(const Eigen::Vector2d& point, int replan_index) const {
    for (const auto& e : entries_) {
      if (expire_after_ > 0 && replan_index - e.replan >= expire_after_) continue;
      if ((e.goal - point).norm() <= merge_radius_) return true;
    }
    return false;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Eigen::Vector2d goal;
    int replan;
  };
  std::vector<Entry> entries_;
  double merge_radius_;
  int expire_after_;
};

}  // namespace semex
