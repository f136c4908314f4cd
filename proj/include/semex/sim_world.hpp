#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semex/rng.hpp"
#include "semex/se2.hpp"
#include "semex/semantic_grid.hpp"

namespace semex {

/// Display and parsing metadata for one class.
struct WorldClass {
  char symbol = '.';
  std::string name;
  std::array<std::uint8_t, 3> color{255, 255, 255};
};

/// Immutable labeled grid driving the simulation. Class 0 is free space;
/// classes 1..C are semantic obstacle classes ('#' is class 1, walls).
/// Row 0 of the map text is the y = 0 row; y grows downward in the text.
class GroundTruthWorld {
 public:
  GroundTruthWorld(int width, int height, double resolution, std::vector<int> classes,
                   std::vector<WorldClass> palette, Pose2 start)
      : width_(width),
        height_(height),
        resolution_(resolution),
        classes_(std::move(classes)),
        palette_(std::move(palette)),
        start_(start) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  int num_classes() const { return static_cast<int>(palette_.size()) - 1; }
  const std::vector<WorldClass>& palette() const { return palette_; }
  const Pose2& start() const { return start_; }

  GridGeometry geometry() const { return {width_, height_, resolution_}; }

  int class_at(int cell) const { return classes_.at(cell); }
  int class_at(int ix, int iy) const { return classes_.at(iy * width_ + ix); }
  bool occupied(int cell) const { return classes_.at(cell) != 0; }

  int cell_at(double px, double py) const {
    const int ix = static_cast<int>(std::floor(px / resolution_));
    const int iy = static_cast<int>(std::floor(py / resolution_));
    return geometry().in_bounds(ix, iy) ? iy * width_ + ix : -1;
  }

  /// True when the straight segment between two points crosses free cells only.
  bool line_of_sight(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
    const double dist = (b - a).norm();
    if (dist == 0.0) {
      const int c = cell_at(a.x(), a.y());
      return c >= 0 && !occupied(c);
    }
    const double angle = std::atan2(b.y() - a.y(), b.x() - a.x());
    const RayTraversal tr = traverse_ray(geometry(), a.x(), a.y(), angle, dist);
    for (const auto& seg : tr.cells)
      if (occupied(seg.cell)) return false;
    return true;
  }

 private:
  int width_;
  int height_;
  double resolution_;
  std::vector<int> classes_;
  std::vector<WorldClass> palette_;
  Pose2 start_;
};

namespace detail {

[[noreturn]] inline void parse_fail(int line, const std::string& msg) {
  throw std::runtime_error("world file line " + std::to_string(line) + ": " + msg);
}

inline std::array<std::uint8_t, 3> parse_color(int line, const std::string& hex) {
  if (hex.size() != 6) parse_fail(line, "color '" + hex + "' must be 6 hex digits");
  std::array<std::uint8_t, 3> rgb{};
  for (int k = 0; k < 3; ++k) {
    const std::string byte = hex.substr(2 * k, 2);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(byte, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != 2) parse_fail(line, "color '" + hex + "' is not valid hex");
    rgb[k] = static_cast<std::uint8_t>(v);
  }
  return rgb;
}

inline std::string rstrip(const std::string& s) {
  std::size_t end = s.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(0, end);
}

}  // namespace detail

/// Parses the plain-text world format:
///   resolution: 0.25
///   classes: 3
///   palette: .=free,ffffff #=wall,303030 t=table,b08040 s=shelf,4060b0
///   start: 1.5 1.5 0.0
///   <grid rows, '.' free, '#' class 1, other palette chars per class>
/// Header lines may appear in any order before the grid. The border must be
/// sealed (no free border cell) and the start pose must lie in a free cell.
inline GroundTruthWorld load_world(std::istream& in) {
  double resolution = 0.0;
  int num_classes = -1;
  std::vector<WorldClass> palette;
  std::optional<Pose2> start;
  std::vector<std::string> rows;
  int grid_first_line = 0;

  std::string raw;
  int line_no = 0;
  bool in_grid = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::rstrip(raw);
    if (!in_grid) {
      if (line.empty()) continue;
      const auto colon = line.find(':');
      const std::string key = colon == std::string::npos ? "" : line.substr(0, colon);
      if (key == "resolution" || key == "classes" || key == "palette" || key == "start") {
        std::istringstream val(line.substr(colon + 1));
        if (key == "resolution") {
          if (!(val >> resolution) || resolution <= 0.0)
            detail::parse_fail(line_no, "resolution must be a positive number");
        } else if (key == "classes") {
          if (!(val >> num_classes) || num_classes < 1)
            detail::parse_fail(line_no, "classes must be a positive integer");
        } else if (key == "start") {
          double x, y, theta;
          if (!(val >> x >> y >> theta)) detail::parse_fail(line_no, "start needs 'x y theta'");
          start = Pose2(x, y, theta);
        } else {
          std::string item;
          while (val >> item) {
            const auto eq = item.find('=');
            const auto comma = item.find(',', eq == std::string::npos ? 0 : eq);
            if (eq != 1 || comma == std::string::npos)
              detail::parse_fail(line_no, "palette entry '" + item + "' must be c=name,rrggbb");
            WorldClass wc;
            wc.symbol = item[0];
            wc.name = item.substr(2, comma - 2);
            wc.color = detail::parse_color(line_no, item.substr(comma + 1));
            palette.push_back(wc);
          }
        }
        continue;
      }
      in_grid = true;
      grid_first_line = line_no;
    }
    if (in_grid) {
      if (line.empty()) continue;
      rows.push_back(line);
    }
  }

  if (resolution <= 0.0) throw std::runtime_error("world file: missing resolution header");
  if (num_classes < 1) throw std::runtime_error("world file: missing classes header");
  if (!start) throw std::runtime_error("world file: missing start header");
  if (rows.empty()) throw std::runtime_error("world file: missing grid rows");
  if (static_cast<int>(palette.size()) != num_classes + 1)
    throw std::runtime_error("world file: palette must declare exactly C+1 = " +
                             std::to_string(num_classes + 1) + " entries, got " +
                             std::to_string(palette.size()));
  if (palette[0].symbol != '.')
    throw std::runtime_error("world file: palette entry 0 must be the free class '.'");
  if (palette[1].symbol != '#')
    throw std::runtime_error("world file: palette entry 1 must be the wall class '#'");

  const int width = static_cast<int>(rows[0].size());
  const int height = static_cast<int>(rows.size());
  std::vector<int> classes(static_cast<std::size_t>(width) * height, 0);
  for (int iy = 0; iy < height; ++iy) {
    const int file_line = grid_first_line + iy;
    if (static_cast<int>(rows[iy].size()) != width)
      detail::parse_fail(file_line, "grid row has " + std::to_string(rows[iy].size()) +
                                        " cells, expected " + std::to_string(width));
    for (int ix = 0; ix < width; ++ix) {
      const char ch = rows[iy][ix];
      int cls = -1;
      for (std::size_t k = 0; k < palette.size(); ++k)
        if (palette[k].symbol == ch) cls = static_cast<int>(k);
      if (cls < 0) detail::parse_fail(file_line, std::string("unknown class character '") + ch + "'");
      classes[static_cast<std::size_t>(iy) * width + ix] = cls;
    }
  }

  for (int ix = 0; ix < width; ++ix) {
    if (classes[ix] == 0) detail::parse_fail(grid_first_line, "border is not sealed (free cell in top row)");
    if (classes[static_cast<std::size_t>(height - 1) * width + ix] == 0)
      detail::parse_fail(grid_first_line + height - 1, "border is not sealed (free cell in bottom row)");
  }
  for (int iy = 0; iy < height; ++iy) {
    if (classes[static_cast<std::size_t>(iy) * width] == 0 ||
        classes[static_cast<std::size_t>(iy) * width + width - 1] == 0)
      detail::parse_fail(grid_first_line + iy, "border is not sealed (free cell at row edge)");
  }

  GroundTruthWorld world(width, height, resolution, std::move(classes), std::move(palette), *start);
  const int start_cell = world.cell_at(start->x, start->y);
  if (start_cell < 0) throw std::runtime_error("world file: start pose outside the grid");
  if (world.occupied(start_cell)) throw std::runtime_error("world file: start pose is in an occupied cell");
  return world;
}

inline GroundTruthWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file: " + path);
  return load_world(in);
}

/// Beam sensor with range noise and semantic label confusion.
struct SensorModel {
  int num_beams = 36;
  double fov = 2.0 * M_PI;
  double max_range = 4.0;
  double sigma_range = 0.02;
  double label_noise = 0.1;  // probability of a uniformly wrong class on a hit

  double beam_angle(int beam) const { return -fov / 2.0 + (beam + 0.5) * fov / num_beams; }

  void validate() const {
    if (num_beams < 1) throw std::invalid_argument("sensor needs at least one beam");
    if (max_range <= 0.0) throw std::invalid_argument("sensor max range must be positive");
    if (sigma_range < 0.0) throw std::invalid_argument("sensor range noise must be >= 0");
    if (label_noise < 0.0 || label_noise >= 1.0)
      throw std::invalid_argument("label noise must be in [0, 1)");
  }
};

/// Simulates one scan from the true pose: exact ray cast to the first
/// occupied cell, Gaussian range noise clamped to (0, lmax], and uniform
/// label confusion among the wrong classes. Deterministic per stream state.
inline Scan simulate_scan(const GroundTruthWorld& world, const Pose2& true_pose,
                          const SensorModel& sensor, RandomStream& rng) {
  Scan scan;
  scan.reserve(sensor.num_beams);
  const int num_classes = world.num_classes();
  for (int b = 0; b < sensor.num_beams; ++b) {
    ScanBeam beam;
    beam.angle = sensor.beam_angle(b);
    const RayTraversal tr = traverse_ray(world.geometry(), true_pose.x, true_pose.y,
                                         true_pose.theta + beam.angle, sensor.max_range);
    double true_range = -1.0;
    int true_class = 0;
    for (const auto& seg : tr.cells) {
      if (world.occupied(seg.cell)) {
        true_range = seg.entry;
        true_class = world.class_at(seg.cell);
        break;
      }
    }
    if (true_range < 0.0) {
      beam.range = sensor.max_range;
      beam.hit = false;
    } else {
      beam.hit = true;
      const double noisy = true_range + rng.gaussian(0.0, sensor.sigma_range);
      beam.range = std::clamp(noisy, 1e-6, sensor.max_range);
      beam.cls = true_class;
      if (num_classes > 1 && rng.uniform() < sensor.label_noise) {
        const int wrong = static_cast<int>(rng.uniform_int(num_classes - 1));
        beam.cls = wrong + 1 >= true_class ? wrong + 2 : wrong + 1;
      }
    }
    scan.push_back(beam);
  }
  return scan;
}

/// Zero-mean Gaussian noise on per-step (dx, dy, dtheta).
struct OdometryModel {
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();

  void validate() const {
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("odometry covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument("odometry covariance must be positive semidefinite");
  }
};

/// Corrupts a true body-frame motion with the model's Gaussian noise.
inline Pose2 simulate_odometry(const Pose2& true_motion, const OdometryModel& model,
                               RandomStream& rng) {
  const Eigen::Vector3d noise = rng.gaussian_vec(model.cov);
  return Pose2(true_motion.x + noise[0], true_motion.y + noise[1], true_motion.theta + noise[2]);
}

/// Oracle loop-closure detection on true poses, with the reported relative
/// transform corrupted by `measurement_cov`.
struct LoopMeasurement {
  int node_id = -1;
  Pose2 relative;  // from the historical node to the current pose
};

/// Fires when the current true pose is within `radius` of a node at least
/// `min_separation` nodes old with free line of sight; picks the nearest
/// eligible node (at most one loop per call).
inline std::optional<LoopMeasurement> detect_loop_closure(
    const std::vector<Pose2>& node_true_poses, const Pose2& current_true_pose,
    const GroundTruthWorld& world, double radius, int min_separation,
    const Eigen::Matrix3d& measurement_cov, RandomStream& rng) {
  const int n = static_cast<int>(node_true_poses.size());
  int best = -1;
  double best_dist = radius;
  for (int i = 0; i + min_separation <= n; ++i) {
    const Pose2& old = node_true_poses[i];
    const double d = std::hypot(old.x - current_true_pose.x, old.y - current_true_pose.y);
    if (d > best_dist) continue;
    if (!world.line_of_sight({old.x, old.y}, {current_true_pose.x, current_true_pose.y})) continue;
    if (d < best_dist || best < 0) {
      best = i;
      best_dist = d;
    }
  }
  if (best < 0) return std::nullopt;
  const Pose2 true_rel = node_true_poses[best].between(current_true_pose);
  const Eigen::Vector3d noise = rng.gaussian_vec(measurement_cov);
  return LoopMeasurement{best,
                         Pose2(true_rel.x + noise[0], true_rel.y + noise[1], true_rel.theta + noise[2])};
}

/// Result of advancing toward a waypoint by one simulation step.
struct StepResult {
  Pose2 pose;
  bool arrived = false;
  bool collided = false;
};

/// Advances the true pose along the segment to `waypoint` by at most `speed`
/// meters, heading set to the motion direction. A segment crossing an
/// occupied cell reports a collision and leaves the pose unchanged.
inline StepResult step_toward(const GroundTruthWorld& world, const Pose2& pose,
                              const Eigen::Vector2d& waypoint, double speed,
                              double arrival_tolerance) {
  StepResult result{pose, false, false};
  const Eigen::Vector2d pos{pose.x, pose.y};
  const Eigen::Vector2d to = waypoint - pos;
  const double dist = to.norm();
  if (dist <= arrival_tolerance) {
    result.arrived = true;
    return result;
  }
  if (speed <= 0.0) return result;

  const double advance = std::min(speed, dist);
  const Eigen::Vector2d target = pos + to / dist * advance;
  if (!world.line_of_sight(pos, target)) {
    result.collided = true;
    return result;
  }
  result.pose = Pose2(target.x(), target.y(), std::atan2(to.y(), to.x()));
  result.arrived = (waypoint - target).norm() <= arrival_tolerance;
  return result;
}

}  // namespace semex
