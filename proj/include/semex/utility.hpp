#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "semex/planner.hpp"
#include "semex/pose_graph.hpp"
#include "semex/se2.hpp"

namespace semex {

/// A scored exploration action: a frontier goal with its path, predicted
/// graph extension, information estimate, travel cost and utility.
struct PathCandidate {
  int frontier_id = -1;
  Frontier frontier;
  PlannedPath path;
  PoseGraph hallucinated;
  double mi = 0.0;
  double cost = 0.0;
  double d_opt = 0.0;
  double utility = 0.0;
};

struct HallucinationConfig {
  double node_spacing = 0.5;
  double loop_radius = 1.0;
  int loop_min_separation = 10;
  Eigen::Matrix3d odom_info = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d loop_info = Eigen::Matrix3d::Identity();
};

/// Poses a robot would reach following `path` from `start`, one every
/// `spacing` meters of arc length, heading along the path.
inline std::vector<Pose2> poses_along_path(const PlannedPath& path, const Pose2& start,
                                           double spacing) {
  std::vector<Pose2> poses;
  if (path.waypoints.size() < 2 || spacing <= 0.0) return poses;

  double next = spacing;
  double walked = 0.0;
  Eigen::Vector2d prev{start.x, start.y};
  for (std::size_t w = 1; w < path.waypoints.size(); ++w) {
    const Eigen::Vector2d seg_end = path.waypoints[w];
    const Eigen::Vector2d seg = seg_end - prev;
    const double seg_len = seg.norm();
    if (seg_len <= 0.0) continue;
    const double heading = std::atan2(seg.y(), seg.x());
    while (next <= walked + seg_len) {
      const Eigen::Vector2d p = prev + seg * ((next - walked) / seg_len);
      poses.emplace_back(p.x(), p.y(), heading);
      next += spacing;
    }
    walked += seg_len;
    prev = seg_end;
  }
  return poses;
}

/// Extends a copy of the pose graph along a candidate path: predicted nodes
/// every node_spacing meters joined by odometry edges, plus a predicted loop
/// edge whenever a new node comes within loop_radius of a sufficiently old
/// node of the input graph with only free cells between them. The existing
/// node must be at least loop_min_separation indices older than the newest
/// input node, else the trailing graph nodes would "close" trivial loops
/// against the path start.
inline PoseGraph hallucinate_graph(const PoseGraph& graph, const PlannedPath& path,
                                   const Pose2& start, const LabelGrid& labels,
                                   const HallucinationConfig& cfg) {
  PoseGraph out = graph;
  if (out.num_nodes() == 0) throw std::invalid_argument("hallucinate_graph: empty graph");
  const int num_real = out.num_nodes();
  const int newest_eligible = num_real - cfg.loop_min_separation;

  auto free_segment = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const double dist = (b - a).norm();
    if (dist == 0.0) return true;
    const GridGeometry geom{labels.width, labels.height, labels.resolution};
    if (!geom.contains_point(a.x(), a.y()) || !geom.contains_point(b.x(), b.y())) return false;
    const RayTraversal tr =
        traverse_ray(geom, a.x(), a.y(), std::atan2(b.y() - a.y(), b.x() - a.x()), dist);
    for (const auto& seg : tr.cells)
      if (labels.labels[seg.cell] != CellLabel::free) return false;
    return true;
  };

  int prev = num_real - 1;
  Pose2 prev_pose = start;
  for (const Pose2& pose : poses_along_path(path, start, cfg.node_spacing)) {
    const int id = out.add_node(pose);
    out.add_odometry_edge(prev, id, prev_pose.between(pose), cfg.odom_info);

    int best = -1;
    double best_dist = cfg.loop_radius;
    for (int old = 0; old < newest_eligible; ++old) {
      const Pose2& op = graph.node(old);
      const double d = std::hypot(op.x - pose.x, op.y - pose.y);
      if (d > best_dist) continue;
      if (!free_segment({op.x, op.y}, {pose.x, pose.y})) continue;
      if (d < best_dist || best < 0) {
        best = old;
        best_dist = d;
      }
    }
    if (best >= 0)
      out.add_loop_edge(best, id, graph.node(best).between(pose), cfg.loop_info);

    prev = id;
    prev_pose = pose;
  }
  return out;
}

/// Information-per-cost discount exponent: alpha = 1 + cost / mi, guarded at
/// mi -> 0 so zero-information candidates stay finite.
inline double alpha(double cost, double mi, double mi_epsilon = 1e-9) {
  if (cost < 0.0) throw std::invalid_argument("alpha: negative cost");
  return 1.0 + cost / std::max(mi, mi_epsilon);
}

/// Shannon-Renyi utility, closed form: SR = D * (1 + mi / cost) with the cost
/// guarded away from zero. Algebraically equal to the printed form below
/// whenever no guard is active.
inline double shannon_renyi_utility(double d_opt, double mi, double cost, double cost_epsilon) {
  if (d_opt < 0.0) throw std::invalid_argument("shannon_renyi_utility: negative d_opt");
  return d_opt * (1.0 + mi / std::max(cost, cost_epsilon));
}

/// Shannon-Renyi utility exactly as printed: SR = D - (1 / (1 - alpha)) * D.
inline double shannon_renyi_utility_printed(double d_opt, double mi, double cost,
                                            double mi_epsilon = 1e-9) {
  if (d_opt < 0.0) throw std::invalid_argument("shannon_renyi_utility: negative d_opt");
  const double a = alpha(cost, mi, mi_epsilon);
  return d_opt - (1.0 / (1.0 - a)) * d_opt;
}

/// Argmax of utility over the candidates. Utilities within a relative 1e-9 of
/// each other count as tied; ties break on smaller cost, then smaller
/// frontier index. Empty input signals exploration complete (no selection).
inline std::optional<std::size_t> select_action(const std::vector<PathCandidate>& candidates) {
  if (candidates.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double ub = candidates[best].utility;
    const double uk = candidates[k].utility;
    const double tol = 1e-9 * std::max(std::abs(ub), std::abs(uk));
    if (uk > ub + tol) {
      best = k;
    } else if (uk >= ub - tol) {  // tied
      if (candidates[k].cost < candidates[best].cost ||
          (candidates[k].cost == candidates[best].cost &&
           candidates[k].frontier_id < candidates[best].frontier_id))
        best = k;
    }
  }
  return best;
}

}  // namespace semex
