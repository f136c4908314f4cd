#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "semex/se2.hpp"
#include "semex/semantic_grid.hpp"

namespace semex {

/// Beam sensor geometry used for information prediction.
struct SensorConfig {
  int num_beams = 36;
  double fov = 2.0 * M_PI;
  double max_range = 4.0;
  double range_discretization = 0.125;

  void validate(double grid_resolution) const {
    if (num_beams < 1) throw std::invalid_argument("num_beams must be >= 1");
    if (max_range <= 0.0) throw std::invalid_argument("max_range must be positive");
    if (range_discretization <= 0.0 || range_discretization > grid_resolution)
      throw std::invalid_argument("range_discretization must be in (0, resolution]");
  }

  /// Beam angle relative to the sensor heading, midpoint-spaced across the fov.
  double beam_angle(int beam) const {
    return -fov / 2.0 + (beam + 0.5) * fov / num_beams;
  }
};

/// Predicted information of a candidate measurement sequence.
struct MIEstimate {
  double total = 0.0;
  std::vector<double> per_pose;
  std::unordered_set<int> counted;
};

namespace detail {

inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  Eigen::VectorXd e(v.size());
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    e[i] = std::exp(v[i] - m);
    s += e[i];
  }
  return e / s;
}

inline double entropy_of_logodds(const Eigen::VectorXd& y) {
  const Eigen::VectorXd p = softmax(y);
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

}  // namespace detail

/// Per-cell measurement kernel as printed: h(x, y) = log(1^T e^y / 1^T e^(x+y))
/// + y^T softmax(x+y). Kept for reference alongside `information_gain`, which
/// is the kernel the estimator integrates (see that function's note).
inline double h_fn(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw std::invalid_argument("h_fn: length mismatch");
  return detail::log_sum_exp(y) - detail::log_sum_exp(x + y) +
         y.dot(detail::softmax(x + y));
}

/// Information a cell gains from the log-odds increment x applied to current
/// log-odds y: KL(softmax(x+y) || softmax(y)) = log(1^T e^y / 1^T e^(x+y)) +
/// x^T softmax(x+y). Nonnegative by construction. This is h_fn with the
/// linear term taken in the increment rather than the current state; taken
/// literally the printed kernel goes negative on uniform cells and cannot
/// lower-bound the exact information.
inline double information_gain(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw std::invalid_argument("information_gain: length mismatch");
  return detail::log_sum_exp(y) - detail::log_sum_exp(x + y) +
         x.dot(detail::softmax(x + y));
}

/// Density (per meter) of the measurement outcome "ray returns at range l
/// inside `hit_cell` with class c": p(m_hit = c) / d(hit) * prod over earlier
/// cells of p(m_i = 0). Constant within the hit cell's chord, so integrating
/// it over the chord yields the outcome probability exactly.
inline double measurement_pdf(const SemanticGrid& grid, const RayTraversal& traversal,
                              int hit_cell, int c) {
  if (c < 1 || c > grid.num_classes())
    throw std::invalid_argument("measurement class must be in [1, C]");
  double prefix = 1.0;
  for (const CellSegment& seg : traversal.cells) {
    if (seg.cell == hit_cell) {
      if (seg.chord() <= 0.0) throw std::invalid_argument("hit cell has zero chord");
      return grid.class_probability(seg.cell, c) / seg.chord() * prefix;
    }
    prefix *= grid.class_probability(seg.cell, 0);
  }
  throw std::invalid_argument("hit cell is not part of the traversal");
}

/// Predicted information of a single beam cast from `pose` at `beam_angle`
/// (relative to the pose heading) against the frozen grid.
///
/// The integral over the return range is evaluated by a composite midpoint
/// rule with steps of `range_discretization`, stratified per traversed cell
/// so the outcome mass of each cell is exact. Cells present in `counted`
/// contribute no information (non-overlapping measurement selection) but
/// still shape the return-range density; all traversed cells are then added
/// to `counted`. The miss outcome carries information too but is left out of
/// the sum, which only lowers the bound.
inline double ray_mutual_information(const SemanticGrid& grid, const Pose2& pose,
                                     double beam_angle, const SensorConfig& cfg,
                                     const ObservationModel& model,
                                     std::unordered_set<int>& counted) {
  const RayTraversal traversal =
      traverse_ray(grid, pose.x, pose.y, pose.theta + beam_angle, cfg.max_range);
  const int num_classes = grid.num_classes();
  const Eigen::VectorXd& y0 = grid.prior_logodds();
  const Eigen::VectorXd free_inc = model.free_beta(num_classes) - y0;

  double total = 0.0;
  double prefix_free_prob = 1.0;  // prod of p(m_i = 0) over earlier cells
  double prefix_gain = 0.0;       // accumulated pass-through information
  for (const CellSegment& seg : traversal.cells) {
    const Eigen::VectorXd y = grid.log_odds(seg.cell);
    const Eigen::VectorXd p = grid.class_probabilities(seg.cell);
    const bool is_counted = counted.contains(seg.cell);

    const double chord = seg.chord();
    const int samples = std::max(1, static_cast<int>(std::lround(chord / cfg.range_discretization)));
    const double weight = chord / samples;  // midpoint sample measure within the chord

    for (int c = 1; c <= num_classes; ++c) {
      const double density = p[c] * prefix_free_prob / chord;
      const double gain =
          prefix_gain +
          (is_counted ? 0.0 : information_gain(model.hit_beta(num_classes, c) - y0, y));
      for (int s = 0; s < samples; ++s) total += density * weight * gain;
    }

    if (!is_counted) prefix_gain += information_gain(free_inc, y);
    prefix_free_prob *= p[0];
  }

  for (const CellSegment& seg : traversal.cells) counted.insert(seg.cell);
  return std::max(total, 0.0);
}

/// Predicted information of scans taken along a hallucinated pose sequence,
/// Eq.-style horizon sum: every beam of every pose, one shared `counted` set
/// (first traversal wins), grid frozen throughout.
inline MIEstimate path_mutual_information(const SemanticGrid& grid,
                                          const std::vector<Pose2>& poses,
                                          const SensorConfig& cfg,
                                          const ObservationModel& model) {
  MIEstimate est;
  est.per_pose.reserve(poses.size());
  for (const Pose2& pose : poses) {
    double pose_total = 0.0;
    if (grid.contains_point(pose.x, pose.y)) {
      for (int b = 0; b < cfg.num_beams; ++b)
        pose_total += ray_mutual_information(grid, pose, cfg.beam_angle(b), cfg, model, est.counted);
    }
    est.per_pose.push_back(pose_total);
    est.total += pose_total;
  }
  return est;
}

/// Exact information of a single beam on a small instance, by enumeration:
/// every (hit cell, class) outcome plus the miss event, explicit posterior
/// update per outcome, H(cells) - E_z[H(cells | z)]. Test oracle scale only.
inline double brute_force_mi(const SemanticGrid& grid, const Pose2& pose, double beam_angle,
                             const SensorConfig& cfg, const ObservationModel& model) {
  const RayTraversal traversal =
      traverse_ray(grid, pose.x, pose.y, pose.theta + beam_angle, cfg.max_range);
  const int num_classes = grid.num_classes();
  if (traversal.cells.size() > 6 || num_classes > 3)
    throw std::domain_error("brute_force_mi: instance too large");

  const Eigen::VectorXd& y0 = grid.prior_logodds();
  const Eigen::VectorXd free_inc = model.free_beta(num_classes) - y0;
  const std::size_t n = traversal.cells.size();

  std::vector<Eigen::VectorXd> y(n);
  double prior_entropy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = grid.log_odds(traversal.cells[i].cell);
    prior_entropy += detail::entropy_of_logodds(y[i]);
  }

  double expected_posterior_entropy = 0.0;
  double outcome_mass = 0.0;
  double prefix_free = 1.0;
  // entropy of the first k cells after a free update, by prefix
  std::vector<double> free_entropy_prefix(n + 1, 0.0);
  std::vector<double> raw_entropy_prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    free_entropy_prefix[i + 1] =
        free_entropy_prefix[i] + detail::entropy_of_logodds(y[i] + free_inc);
    raw_entropy_prefix[i + 1] = raw_entropy_prefix[i] + detail::entropy_of_logodds(y[i]);
  }

  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::VectorXd pk = detail::softmax(y[k]);
    for (int c = 1; c <= num_classes; ++c) {
      const double pz = pk[c] * prefix_free;
      const double h = free_entropy_prefix[k] +
                       detail::entropy_of_logodds(y[k] + model.hit_beta(num_classes, c) - y0) +
                       (raw_entropy_prefix[n] - raw_entropy_prefix[k + 1]);
      expected_posterior_entropy += pz * h;
      outcome_mass += pz;
    }
    prefix_free *= pk[0];
  }
  // miss: every traversed cell updated toward free
  expected_posterior_entropy += prefix_free * free_entropy_prefix[n];
  outcome_mass += prefix_free;
  if (std::abs(outcome_mass - 1.0) > 1e-9)
    throw std::runtime_error("brute_force_mi: outcome probabilities do not sum to 1");

  return prior_entropy - expected_posterior_entropy;
}

}  // namespace semex
