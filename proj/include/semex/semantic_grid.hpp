#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semex/se2.hpp"

namespace semex {

/// One cell crossed by a ray, with entry/exit distances along the ray (m).
struct CellSegment {
  int cell = -1;
  double entry = 0.0;
  double exit = 0.0;

  double chord() const { return exit - entry; }
};

/// Ordered cells crossed by a ray. `hit` indexes into `cells` when the ray
/// ended on a surface; it is empty for max-range misses.
struct RayTraversal {
  std::vector<CellSegment> cells;
  std::optional<std::size_t> hit;

  bool empty() const { return cells.empty(); }
  double length() const { return cells.empty() ? 0.0 : cells.back().exit; }
};

/// Log-odds increments a single measurement induces along a ray.
struct InverseObservation {
  struct CellUpdate {
    int cell = -1;
    Eigen::VectorXd beta;  // component 0 is always 0
  };
  std::vector<CellUpdate> updates;
};

/// One beam of a semantic range scan. `angle` is relative to the sensor
/// heading; `hit` is false for max-range misses (then `cls` is ignored).
struct ScanBeam {
  double angle = 0.0;
  double range = 0.0;
  int cls = 0;
  bool hit = false;
};

using Scan = std::vector<ScanBeam>;

/// Cell-grid geometry shared by the posterior grid and ground-truth worlds.
struct GridGeometry {
  int width = 0;
  int height = 0;
  double resolution = 0.0;

  bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < width && iy >= 0 && iy < height; }
  int cell_index(int ix, int iy) const { return iy * width + ix; }
  bool contains_point(double px, double py) const {
    return px >= 0.0 && px < width * resolution && py >= 0.0 && py < height * resolution;
  }
};

/// Multi-class occupancy grid over C semantic classes plus free space.
/// Each cell stores a vector of C+1 log-odds against the free class, so
/// component 0 is identically zero and the cell pmf is the softmax of the
/// vector. Bayesian fusion is additive in this parameterization.
class SemanticGrid {
 public:
  static constexpr double kLogOddsClamp = 50.0;

  SemanticGrid(int width, int height, double resolution, int num_classes,
               const Eigen::VectorXd& prior)
      : width_(width), height_(height), resolution_(resolution), num_classes_(num_classes) {
    if (width < 1 || height < 1) throw std::invalid_argument("grid dimensions must be >= 1");
    if (resolution <= 0.0) throw std::invalid_argument("grid resolution must be positive");
    if (num_classes < 1) throw std::invalid_argument("need at least one semantic class");
    if (prior.size() != num_classes + 1)
      throw std::invalid_argument("prior must have C+1 components");
    double sum = 0.0;
    for (int c = 0; c <= num_classes; ++c) {
      if (prior[c] <= 0.0) throw std::invalid_argument("prior components must be positive");
      sum += prior[c];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("prior must sum to 1");

    prior_logodds_ = Eigen::VectorXd::Zero(num_classes + 1);
    for (int c = 1; c <= num_classes; ++c) prior_logodds_[c] = std::log(prior[c] / prior[0]);
    data_.resize(static_cast<std::size_t>(width) * height * (num_classes + 1));
    reset();
  }

  /// Grid with a uniform prior over the C+1 classes.
  static SemanticGrid uniform(int width, int height, double resolution, int num_classes) {
    Eigen::VectorXd prior =
        Eigen::VectorXd::Constant(num_classes + 1, 1.0 / (num_classes + 1));
    return SemanticGrid(width, height, resolution, num_classes, prior);
  }

  void reset() {
    const int stride = num_classes_ + 1;
    for (int i = 0; i < width_ * height_; ++i)
      for (int c = 0; c < stride; ++c) data_[static_cast<std::size_t>(i) * stride + c] = prior_logodds_[c];
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return width_ * height_; }
  double resolution() const { return resolution_; }
  int num_classes() const { return num_classes_; }
  const Eigen::VectorXd& prior_logodds() const { return prior_logodds_; }

  int cell_index(int ix, int iy) const { return iy * width_ + ix; }
  int cell_x(int cell) const { return cell % width_; }
  int cell_y(int cell) const { return cell / width_; }
  bool in_bounds(int ix, int iy) const { return ix >= 0 && ix < width_ && iy >= 0 && iy < height_; }

  /// Cell containing a metric point, or -1 when outside the grid.
  int cell_at(double px, double py) const {
    const int ix = static_cast<int>(std::floor(px / resolution_));
    const int iy = static_cast<int>(std::floor(py / resolution_));
    return in_bounds(ix, iy) ? cell_index(ix, iy) : -1;
  }

  Eigen::Vector2d cell_center(int cell) const {
    return {(cell_x(cell) + 0.5) * resolution_, (cell_y(cell) + 0.5) * resolution_};
  }

  Eigen::VectorXd log_odds(int cell) const {
    check_cell(cell);
    const int stride = num_classes_ + 1;
    Eigen::VectorXd y(stride);
    for (int c = 0; c < stride; ++c) y[c] = data_[static_cast<std::size_t>(cell) * stride + c];
    return y;
  }

  void set_log_odds(int cell, const Eigen::VectorXd& y) {
    check_cell(cell);
    if (y.size() != num_classes_ + 1) throw std::invalid_argument("log-odds size mismatch");
    const int stride = num_classes_ + 1;
    data_[static_cast<std::size_t>(cell) * stride] = 0.0;
    for (int c = 1; c < stride; ++c)
      data_[static_cast<std::size_t>(cell) * stride + c] = std::clamp(y[c], -kLogOddsClamp, kLogOddsClamp);
  }

  /// p(m_cell = c): softmax of the cell's log-odds, max-subtracted for stability.
  double class_probability(int cell, int c) const {
    check_cell(cell);
    if (c < 0 || c > num_classes_) throw std::out_of_range("class index out of range");
    return class_probabilities(cell)[c];
  }

  Eigen::VectorXd class_probabilities(int cell) const {
    check_cell(cell);
    const int stride = num_classes_ + 1;
    const double* y = &data_[static_cast<std::size_t>(cell) * stride];
    double m = y[0];
    for (int c = 1; c < stride; ++c) m = std::max(m, y[c]);
    Eigen::VectorXd p(stride);
    double z = 0.0;
    for (int c = 0; c < stride; ++c) {
      p[c] = std::exp(y[c] - m);
      z += p[c];
    }
    return p / z;
  }

  /// Class with the highest posterior probability (smallest index on ties).
  int argmax_class(int cell) const {
    check_cell(cell);
    const int stride = num_classes_ + 1;
    const double* y = &data_[static_cast<std::size_t>(cell) * stride];
    int best = 0;
    for (int c = 1; c < stride; ++c)
      if (y[c] > y[best]) best = c;
    return best;
  }

  /// True when the cell has never been (net) updated away from the prior.
  bool at_prior(int cell) const {
    check_cell(cell);
    const int stride = num_classes_ + 1;
    const double* y = &data_[static_cast<std::size_t>(cell) * stride];
    for (int c = 0; c < stride; ++c)
      if (y[c] != prior_logodds_[c]) return false;
    return true;
  }

  /// Applies one observation increment: y <- y + (beta - y0).
  void update_cell(int cell, const Eigen::VectorXd& beta) {
    check_cell(cell);
    if (beta.size() != num_classes_ + 1) throw std::invalid_argument("beta size mismatch");
    if (beta[0] != 0.0) throw std::invalid_argument("beta component 0 must be 0");
    const int stride = num_classes_ + 1;
    double* y = &data_[static_cast<std::size_t>(cell) * stride];
    for (int c = 1; c < stride; ++c)
      y[c] = std::clamp(y[c] + beta[c] - prior_logodds_[c], -kLogOddsClamp, kLogOddsClamp);
  }

  double cell_entropy(int cell) const {
    const Eigen::VectorXd p = class_probabilities(cell);
    double h = 0.0;
    for (int c = 0; c < p.size(); ++c)
      if (p[c] > 0.0) h -= p[c] * std::log(p[c]);
    return h;
  }

  /// Joint map entropy under the cell-independence assumption.
  double map_entropy() const {
    double h = 0.0;
    for (int i = 0; i < size(); ++i) h += cell_entropy(i);
    return h;
  }

  double metric_width() const { return width_ * resolution_; }
  double metric_height() const { return height_ * resolution_; }

  bool contains_point(double px, double py) const {
    return px >= 0.0 && px < metric_width() && py >= 0.0 && py < metric_height();
  }

  GridGeometry geometry() const { return {width_, height_, resolution_}; }

 private:
  void check_cell(int cell) const {
    if (cell < 0 || cell >= size()) throw std::out_of_range("cell index out of range");
  }

  int width_;
  int height_;
  double resolution_;
  int num_classes_;
  Eigen::VectorXd prior_logodds_;
  std::vector<double> data_;
};

/// Casts a ray through the grid, returning every crossed cell with its exact
/// chord length. Grid-line crossing (DDA) rather than integer Bresenham: the
/// measurement density needs the true distance traveled inside each cell.
/// Stops at `max_range` or the grid boundary, whichever comes first.
inline RayTraversal traverse_ray(const GridGeometry& grid, double ox, double oy, double angle,
                                 double max_range) {
  if (!grid.contains_point(ox, oy))
    throw std::domain_error("ray origin outside grid bounds");

  RayTraversal out;
  if (max_range <= 0.0) return out;

  const double res = grid.resolution;
  const double dx = std::cos(angle), dy = std::sin(angle);

  int ix = static_cast<int>(std::floor(ox / res));
  int iy = static_cast<int>(std::floor(oy / res));

  const double inf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
  const int step_y = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);

  // distance along the ray to the next vertical / horizontal grid line
  double t_max_x = inf, t_max_y = inf;
  double t_delta_x = inf, t_delta_y = inf;
  if (step_x > 0) t_max_x = ((ix + 1) * res - ox) / dx;
  if (step_x < 0) t_max_x = (ix * res - ox) / dx;
  if (step_y > 0) t_max_y = ((iy + 1) * res - oy) / dy;
  if (step_y < 0) t_max_y = (iy * res - oy) / dy;
  if (step_x != 0) t_delta_x = res / std::abs(dx);
  if (step_y != 0) t_delta_y = res / std::abs(dy);

  double t = 0.0;
  while (t < max_range && grid.in_bounds(ix, iy)) {
    const double t_next = std::min({t_max_x, t_max_y, max_range});
    // sub-1e-12 slivers are rounding artifacts of near-corner crossings
    if (t_next - t > 1e-12)
      out.cells.push_back({grid.cell_index(ix, iy), t, t_next});
    if (t_next >= max_range) break;
    // advance across the crossed line(s); a corner crossing advances both
    if (t_max_x <= t_max_y) {
      ix += step_x;
      if (t_max_x == t_max_y) {
        iy += step_y;
        t_max_y += t_delta_y;
      }
      t = t_max_x;
      t_max_x += t_delta_x;
    } else {
      iy += step_y;
      t = t_max_y;
      t_max_y += t_delta_y;
    }
  }
  return out;
}

inline RayTraversal traverse_ray(const SemanticGrid& grid, double ox, double oy, double angle,
                                 double max_range) {
  return traverse_ray(grid.geometry(), ox, oy, angle, max_range);
}

/// Observation magnitudes for the inverse observation model (log-odds).
struct ObservationModel {
  double hit_logodds = 1.386;   // hit 4x more likely under the observed class
  double miss_logodds = 0.847;  // pass-through evidence toward free

  Eigen::VectorXd free_beta(int num_classes) const {
    Eigen::VectorXd b = Eigen::VectorXd::Constant(num_classes + 1, -miss_logodds);
    b[0] = 0.0;
    return b;
  }

  Eigen::VectorXd hit_beta(int num_classes, int cls) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(num_classes + 1);
    b[cls] = hit_logodds;
    return b;
  }
};

/// Builds the per-cell log-odds increments for one measurement: cells in
/// front of the hit are pushed toward free, the hit cell toward the observed
/// class; a max-range miss pushes every traversed cell toward free.
inline InverseObservation inverse_observation(const RayTraversal& traversal, int observed_class,
                                              const ObservationModel& model, int num_classes) {
  InverseObservation obs;
  if (traversal.empty()) return obs;
  if (traversal.hit && (observed_class < 1 || observed_class > num_classes))
    throw std::invalid_argument("observed class must be in [1, C] for hits");

  const Eigen::VectorXd free_b = model.free_beta(num_classes);
  const std::size_t end = traversal.hit ? *traversal.hit : traversal.cells.size();
  obs.updates.reserve(end + 1);
  for (std::size_t i = 0; i < end; ++i)
    obs.updates.push_back({traversal.cells[i].cell, free_b});
  if (traversal.hit)
    obs.updates.push_back(
        {traversal.cells[*traversal.hit].cell, model.hit_beta(num_classes, observed_class)});
  return obs;
}

/// Integrates a full scan taken at `pose`. Updates are gathered for the whole
/// scan and applied in a canonical order keyed on cell and increment, so any
/// permutation of the beams produces a bit-identical grid.
inline void integrate_scan(SemanticGrid& grid, const Pose2& pose, const Scan& scan,
                           const ObservationModel& model, double max_range) {
  if (!grid.contains_point(pose.x, pose.y))
    throw std::domain_error("scan pose outside grid bounds");

  struct Update {
    int cell;
    Eigen::VectorXd beta;
  };
  std::vector<Update> updates;
  updates.reserve(scan.size() * 8);

  for (const ScanBeam& beam : scan) {
    const double range = beam.hit ? beam.range : max_range;
    RayTraversal tr = traverse_ray(grid, pose.x, pose.y, pose.theta + beam.angle, range);
    if (tr.empty()) continue;
    if (beam.hit) tr.hit = tr.cells.size() - 1;
    InverseObservation obs = inverse_observation(tr, beam.cls, model, grid.num_classes());
    for (auto& u : obs.updates) updates.push_back({u.cell, std::move(u.beta)});
  }

  std::sort(updates.begin(), updates.end(), [](const Update& a, const Update& b) {
    if (a.cell != b.cell) return a.cell < b.cell;
    return std::lexicographical_compare(a.beta.data(), a.beta.data() + a.beta.size(),
                                        b.beta.data(), b.beta.data() + b.beta.size());
  });
  for (const Update& u : updates) grid.update_cell(u.cell, u.beta);
}

}  // namespace semex
