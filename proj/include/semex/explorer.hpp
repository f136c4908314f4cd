#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semex/config.hpp"
#include "semex/info_theory.hpp"
#include "semex/metrics.hpp"
#include "semex/planner.hpp"
#include "semex/pose_graph.hpp"
#include "semex/rng.hpp"
#include "semex/se2.hpp"
#include "semex/semantic_grid.hpp"
#include "semex/sim_world.hpp"
#include "semex/spectral.hpp"
#include "semex/utility.hpp"

namespace semex {

/// One candidate row of the per-decision log.
struct DecisionRow {
  int replan = 0;
  int frontier_id = -1;
  double mi = 0.0;
  double cost = 0.0;
  double d_opt = 0.0;
  double utility = 0.0;
  bool chosen = false;
};

enum class RunStatus { complete, budget_exhausted, collision };

inline std::string status_name(RunStatus s) {
  switch (s) {
    case RunStatus::complete: return "complete";
    case RunStatus::budget_exhausted: return "budget";
    case RunStatus::collision: return "collision";
  }
  return "?";
}

struct RunResult {
  RunStatus status = RunStatus::budget_exhausted;
  int steps = 0;
  int replans = 0;
  int loop_closures = 0;
  RunLog log;
  SemanticGrid grid;
  PoseGraph graph;
  std::vector<Pose2> node_true_poses;
  std::vector<DecisionRow> decisions;
  std::string diagnostic;
};

/// Closed-loop exploration of a ground-truth world under one method. The
/// robot senses from its true pose, maps at its estimated pose, and replans
/// on arrival, on a blacklisted goal, or every `replan_every` steps. All
/// randomness comes from named sub-streams of the master seed, so a (world,
/// config, seed) triple fully determines the run.
class Explorer {
 public:
  Explorer(const GroundTruthWorld& world, const RunConfig& cfg)
      : world_(world),
        cfg_(cfg),
        method_(parse_method(cfg.method)),
        norm_(parse_norm(cfg.norm_p)),
        sensor_rng_(RandomStream::substream(cfg.seed, "sensor")),
        odometry_rng_(RandomStream::substream(cfg.seed, "odometry")),
        loop_rng_(RandomStream::substream(cfg.seed, "loop")),
        grid_(SemanticGrid::uniform(world.width(), world.height(), world.resolution(),
                                    world.num_classes())),
        blacklist_(cfg.blacklist_merge_cells * world.resolution(), cfg.blacklist_expire_replans) {
    sensor_.num_beams = cfg.sensor_beams;
    sensor_.fov = cfg.sensor_fov;
    sensor_.max_range = cfg.sensor_max_range;
    sensor_.sigma_range = cfg.sensor_sigma_range;
    sensor_.label_noise = cfg.sensor_label_noise;
    sensor_.validate();

    mi_config_.num_beams = cfg.sensor_beams;
    mi_config_.fov = cfg.sensor_fov;
    mi_config_.max_range = cfg.sensor_max_range;
    mi_config_.range_discretization = cfg.range_discretization;
    mi_config_.validate(world.resolution());

    observation_.hit_logodds = cfg.hit_logodds;
    observation_.miss_logodds = cfg.miss_logodds;

    const double st = cfg.odom_sigma_theta_deg * M_PI / 180.0;
    odometry_.cov = Eigen::Vector3d(cfg.odom_sigma_xy * cfg.odom_sigma_xy,
                                    cfg.odom_sigma_xy * cfg.odom_sigma_xy, st * st)
                        .asDiagonal();
    odometry_.validate();
    const double lt = cfg.loop_sigma_theta_deg * M_PI / 180.0;
    loop_cov_ = Eigen::Vector3d(cfg.loop_sigma_xy * cfg.loop_sigma_xy,
                                cfg.loop_sigma_xy * cfg.loop_sigma_xy, lt * lt)
                    .asDiagonal();
    loop_info_ = loop_cov_.inverse();

    thresholds_ = {cfg.free_threshold, cfg.occ_threshold};

    true_pose_ = world.start();
    estimated_pose_ = world.start();
    graph_.add_node(estimated_pose_);
    graph_.set_fixed_node(0);
    node_true_poses_.push_back(true_pose_);
    odom_since_node_ = Pose2();
    cov_since_node_.setZero();
  }

  RunResult run() {
    RunResult result{RunStatus::budget_exhausted, 0, 0, 0, {}, grid_, graph_, {}, {}, ""};

    for (int t = 0; t < cfg_.steps; ++t) {
      sense(t);

      const bool need_plan = !active_path_ || steps_since_replan_ >= cfg_.replan_every;
      if (need_plan) {
        const bool frontiers_left = replan();
        if (!frontiers_left) {
          result.status = RunStatus::complete;
          result.steps = t + 1;
          break;
        }
      }

      if (active_path_) {
        if (!follow_path()) {
          result.status = RunStatus::collision;
          result.steps = t + 1;
          result.diagnostic = "collision at true pose (" + std::to_string(true_pose_.x) + ", " +
                              std::to_string(true_pose_.y) + "): map and plan diverged";
          break;
        }
      }
      ++steps_since_replan_;
      result.steps = t + 1;
    }

    finalize();
    result.log = log_;
    result.grid = grid_;
    result.graph = graph_;
    result.node_true_poses = node_true_poses_;
    result.decisions = decisions_;
    result.replans = replans_;
    result.loop_closures = loop_closures_;
    return result;
  }

  const SemanticGrid& grid() const { return grid_; }
  const PoseGraph& graph() const { return graph_; }

 private:
  void sense(int t) {
    const Scan scan = simulate_scan(world_, true_pose_, sensor_, sensor_rng_);
    if (grid_.contains_point(estimated_pose_.x, estimated_pose_.y)) {
      integrate_scan(grid_, estimated_pose_, scan, observation_, sensor_.max_range);
      const int anchor = graph_.num_nodes() - 1;
      scan_history_.push_back({anchor, graph_.node(anchor).between(estimated_pose_), scan});
    }
    const LabelGrid labels = classify_cells(grid_, thresholds_);
    int explored = 0;
    for (const CellLabel l : labels.labels)
      if (l != CellLabel::unknown) ++explored;
    log_.steps.push_back({t, true_pose_, estimated_pose_, explored});
  }

  /// Returns false when no (non-blacklisted) frontier remains.
  bool replan() {
    active_path_.reset();
    steps_since_replan_ = 0;
    const LabelGrid labels = classify_cells(grid_, thresholds_);
    const std::vector<Frontier> frontiers = detect_frontiers(labels, cfg_.min_frontier_size);

    int start_cell = grid_.cell_at(estimated_pose_.x, estimated_pose_.y);
    if (start_cell < 0) return false;  // estimate drifted out of the map

    std::vector<PathCandidate> candidates;
    bool any_frontier = false;
    for (std::size_t f = 0; f < frontiers.size(); ++f) {
      const Frontier& frontier = frontiers[f];
      if (blacklist_.contains(frontier.centroid, replans_)) continue;
      any_frontier = true;

      auto path = astar(labels, start_cell, frontier.goal_cell, cfg_.clearance_cells);
      if (!path) {
        blacklist_.add(frontier.centroid, replans_);
        continue;
      }

      PathCandidate cand;
      cand.frontier_id = static_cast<int>(f);
      cand.frontier = frontier;
      cand.path = std::move(*path);
      cand.cost = cand.path.length;
      score_candidate(cand, labels);
      candidates.push_back(std::move(cand));
    }

    if (!any_frontier) return false;  // exploration complete
    const auto chosen = select_action(candidates);
    if (!chosen) {
      // frontiers exist but all newly blacklisted; try again next cycle
      ++replans_;
      return pending_retries_++ < 3;
    }
    pending_retries_ = 0;

    for (std::size_t k = 0; k < candidates.size(); ++k)
      decisions_.push_back({replans_, candidates[k].frontier_id, candidates[k].mi,
                            candidates[k].cost, candidates[k].d_opt, candidates[k].utility,
                            k == *chosen});

    active_path_ = candidates[*chosen].path;
    active_goal_ = candidates[*chosen].frontier.centroid;
    waypoint_index_ = active_path_->waypoints.size() > 1 ? 1 : 0;
    ++replans_;
    return true;
  }

  void score_candidate(PathCandidate& cand, const LabelGrid& labels) {
    HallucinationConfig hc;
    hc.node_spacing = cfg_.node_spacing;
    hc.loop_radius = cfg_.loop_radius;
    hc.loop_min_separation = cfg_.loop_min_separation;
    hc.odom_info = symmetrize(cov_step_scaled_inverse());
    hc.loop_info = cfg_.gamma_lc * hc.odom_info;
    cand.hallucinated = hallucinate_graph(graph_, cand.path, estimated_pose_, labels, hc);

    const double cost_eps = grid_.resolution() / 2.0;
    switch (method_) {
      case Method::nearest_frontier:
        cand.mi = 0.0;
        cand.d_opt = 0.0;
        cand.utility = -cand.cost;
        break;
      case Method::mi_only: {
        const auto poses = poses_along_path(cand.path, estimated_pose_, cfg_.node_spacing);
        cand.mi = path_mutual_information(grid_, poses, mi_config_, observation_).total;
        cand.d_opt = graph_d_opt(cand.hallucinated, norm_, cfg_.gamma_lc);
        cand.utility = cand.mi / std::max(cand.cost, cost_eps);
        break;
      }
      case Method::full: {
        const auto poses = poses_along_path(cand.path, estimated_pose_, cfg_.node_spacing);
        cand.mi = path_mutual_information(grid_, poses, mi_config_, observation_).total;
        cand.d_opt = graph_d_opt(cand.hallucinated, norm_, cfg_.gamma_lc);
        cand.utility = shannon_renyi_utility(cand.d_opt, cand.mi, cand.cost, cost_eps);
        break;
      }
    }
  }

  /// Expected information of one odometry edge: the per-step covariance
  /// scaled to node_spacing worth of motion, inverted.
  Eigen::Matrix3d cov_step_scaled_inverse() const {
    const double steps_per_node = std::max(1.0, cfg_.node_spacing / std::max(cfg_.speed, 1e-9));
    const Eigen::Matrix3d cov = odometry_.cov * steps_per_node;
    if (cov.isZero(0.0)) return Eigen::Matrix3d::Identity() * 1e6;
    return cov.inverse();
  }

  static Eigen::Matrix3d symmetrize(const Eigen::Matrix3d& m) {
    return 0.5 * (m + m.transpose());
  }

  /// Returns false on collision.
  bool follow_path() {
    const Eigen::Vector2d wp_est = active_path_->waypoints[waypoint_index_];
    // the plan lives in the estimated frame; command the motion in body
    // coordinates and execute it from the true pose
    const Eigen::Vector2d body_target =
        estimated_pose_.rotation().transpose() * (wp_est - estimated_pose_.translation());
    const Eigen::Vector2d wp_true = true_pose_.transform(body_target);

    const double tol = world_.resolution() / 2.0;
    const StepResult sr = step_toward(world_, true_pose_, wp_true, cfg_.speed, tol);
    if (sr.collided) return false;

    const Pose2 true_delta = true_pose_.between(sr.pose);
    true_pose_ = sr.pose;
    const Pose2 noisy_delta = simulate_odometry(true_delta, odometry_, odometry_rng_);
    estimated_pose_ = estimated_pose_.compose(noisy_delta);

    const Eigen::Matrix3d ad_inv = adjoint(noisy_delta.inverse());
    cov_since_node_ = ad_inv * cov_since_node_ * ad_inv.transpose() + odometry_.cov;
    odom_since_node_ = odom_since_node_.compose(noisy_delta);
    dist_since_node_ += std::hypot(noisy_delta.x, noisy_delta.y);

    if (dist_since_node_ >= cfg_.node_spacing) add_graph_node();

    if (sr.arrived) {
      if (waypoint_index_ + 1 < active_path_->waypoints.size()) {
        ++waypoint_index_;
      } else {
        active_path_.reset();  // goal reached; replan next step
      }
    }
    return true;
  }

  void add_graph_node() {
    Eigen::Matrix3d info;
    if (cov_since_node_.isZero(0.0)) {
      info = Eigen::Matrix3d::Identity() * 1e6;  // noiseless odometry
    } else {
      info = symmetrize(cov_since_node_.inverse());
    }
    const int prev = graph_.num_nodes() - 1;
    const int id = graph_.add_node(estimated_pose_);
    graph_.add_odometry_edge(prev, id, odom_since_node_, info);

    const auto loop = detect_loop_closure(node_true_poses_, true_pose_, world_, cfg_.loop_radius,
                                          cfg_.loop_min_separation, loop_cov_, loop_rng_);
    node_true_poses_.push_back(true_pose_);
    odom_since_node_ = Pose2();
    cov_since_node_.setZero();
    dist_since_node_ = 0.0;

    if (loop) {
      graph_.add_loop_edge(loop->node_id, id, loop->relative, symmetrize(loop_info_));
      ++loop_closures_;
      reoptimize();
    }
  }

  /// Optimizes the graph and rebuilds the map from the stored scans at the
  /// corrected poses; the live estimate is re-anchored to the last node.
  void reoptimize() {
    OptimizeResult opt = optimize(graph_);
    graph_ = std::move(opt.graph);
    estimated_pose_ = graph_.node(graph_.num_nodes() - 1).compose(odom_since_node_);

    grid_.reset();
    for (const StoredScan& s : scan_history_) {
      const Pose2 pose = graph_.node(s.anchor_node).compose(s.offset);
      if (!grid_.contains_point(pose.x, pose.y)) continue;
      integrate_scan(grid_, pose, s.scan, observation_, sensor_.max_range);
    }
  }

  void finalize() {
    bool has_loop = false;
    for (const auto& e : graph_.edges())
      if (e.kind == EdgeKind::loop) has_loop = true;
    if (has_loop) reoptimize();
  }

  struct StoredScan {
    int anchor_node;
    Pose2 offset;  // estimated pose relative to the anchor at integration time
    Scan scan;
  };

  const GroundTruthWorld& world_;
  RunConfig cfg_;
  Method method_;
  MatrixNorm norm_;

  RandomStream sensor_rng_;
  RandomStream odometry_rng_;
  RandomStream loop_rng_;

  SemanticGrid grid_;
  PoseGraph graph_;
  SensorModel sensor_;
  SensorConfig mi_config_;
  ObservationModel observation_;
  OdometryModel odometry_;
  Eigen::Matrix3d loop_cov_ = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d loop_info_ = Eigen::Matrix3d::Identity();
  LabelThresholds thresholds_;
  Blacklist blacklist_;

  Pose2 true_pose_;
  Pose2 estimated_pose_;
  std::vector<Pose2> node_true_poses_;
  Pose2 odom_since_node_;
  Eigen::Matrix3d cov_since_node_ = Eigen::Matrix3d::Zero();
  double dist_since_node_ = 0.0;

  std::vector<StoredScan> scan_history_;
  std::optional<PlannedPath> active_path_;
  Eigen::Vector2d active_goal_ = Eigen::Vector2d::Zero();
  std::size_t waypoint_index_ = 0;
  int steps_since_replan_ = 0;
  int replans_ = 0;
  int loop_closures_ = 0;
  int pending_retries_ = 0;

  RunLog log_;
  std::vector<DecisionRow> decisions_;
};

/// Runs one (world, config, seed) exploration.
inline RunResult run_exploration(const GroundTruthWorld& world, const RunConfig& cfg) {
  Explorer explorer(world, cfg);
  return explorer.run();
}

}  // namespace semex
