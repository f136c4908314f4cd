#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semex/explorer.hpp"
#include "semex/metrics.hpp"
#include "semex/pose_graph.hpp"
#include "semex/semantic_grid.hpp"
#include "semex/sim_world.hpp"

namespace semex {

/// Shortest-round-trip double formatting; identical across runs, so CSV
/// artifacts are byte-stable for a given (world, config, seed).
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_optional(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "undefined";
}

// ---------------------------------------------------------------------------
// CSV artifacts

inline std::string steps_csv(const RunLog& log, double resolution) {
  std::ostringstream os;
  os << "step,true_x,true_y,true_theta,est_x,est_y,est_theta,explored_cells,explored_m2\n";
  for (const RunStep& s : log.steps) {
    os << s.t << ',' << fmt_double(s.true_pose.x) << ',' << fmt_double(s.true_pose.y) << ','
       << fmt_double(s.true_pose.theta) << ',' << fmt_double(s.estimated_pose.x) << ','
       << fmt_double(s.estimated_pose.y) << ',' << fmt_double(s.estimated_pose.theta) << ','
       << s.explored_cells << ',' << fmt_double(s.explored_cells * resolution * resolution)
       << '\n';
  }
  return os.str();
}

inline std::string decisions_csv(const std::vector<DecisionRow>& rows) {
  std::ostringstream os;
  os << "replan,frontier_id,mi,cost,d_opt,utility,chosen\n";
  for (const DecisionRow& r : rows)
    os << r.replan << ',' << r.frontier_id << ',' << fmt_double(r.mi) << ',' << fmt_double(r.cost)
       << ',' << fmt_double(r.d_opt) << ',' << fmt_double(r.utility) << ',' << (r.chosen ? 1 : 0)
       << '\n';
  return os.str();
}

/// Per-run evaluation against the ground truth.
struct RunSummary {
  std::uint64_t seed = 0;
  std::string method;
  std::string status;
  int steps = 0;
  int replans = 0;
  int loop_closures = 0;
  double ate_rmse = 0.0;
  std::optional<double> map_err;
  std::optional<double> mean_iou_value;
  std::vector<std::optional<double>> class_iou;
  double coverage_m2 = 0.0;
  double coverage_ratio = 0.0;
  std::optional<int> steps_to_90pct;
};

inline RunSummary summarize_run(const RunResult& result, const GroundTruthWorld& world,
                                const RunConfig& cfg) {
  RunSummary s;
  s.seed = cfg.seed;
  s.method = cfg.method;
  s.status = status_name(result.status);
  s.steps = result.steps;
  s.replans = result.replans;
  s.loop_closures = result.loop_closures;

  std::vector<Pose2> estimated = result.graph.nodes();
  s.ate_rmse = estimated.size() >= 2 ? ate(estimated, result.node_true_poses) : 0.0;

  const LabelGrid labels =
      classify_cells(result.grid, {cfg.free_threshold, cfg.occ_threshold});
  s.map_err = map_error(labels, world);
  s.mean_iou_value = mean_iou(result.grid, world);
  for (int c = 1; c <= world.num_classes(); ++c)
    s.class_iou.push_back(iou_per_class(result.grid, world, c));

  const double cell_area = world.resolution() * world.resolution();
  const int explored = result.log.steps.empty() ? 0 : result.log.steps.back().explored_cells;
  const int reachable = reachable_observable_cells(world);
  s.coverage_m2 = explored * cell_area;
  s.coverage_ratio = reachable > 0 ? static_cast<double>(explored) / reachable : 0.0;
  s.steps_to_90pct = steps_to_coverage(result.log, static_cast<int>(std::ceil(0.9 * reachable)));
  return s;
}

inline std::string summary_csv(const RunSummary& s) {
  std::ostringstream os;
  os << "seed,method,status,steps,replans,loop_closures,ate_rmse,map_error,mean_iou";
  for (std::size_t c = 1; c <= s.class_iou.size(); ++c) os << ",iou_" << c;
  os << ",coverage_m2,coverage_ratio,steps_to_90pct\n";
  os << s.seed << ',' << s.method << ',' << s.status << ',' << s.steps << ',' << s.replans << ','
     << s.loop_closures << ',' << fmt_double(s.ate_rmse) << ',' << fmt_optional(s.map_err) << ','
     << fmt_optional(s.mean_iou_value);
  for (const auto& v : s.class_iou) os << ',' << fmt_optional(v);
  os << ',' << fmt_double(s.coverage_m2) << ',' << fmt_double(s.coverage_ratio) << ','
     << (s.steps_to_90pct ? std::to_string(*s.steps_to_90pct) : "undefined") << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Pose-graph exchange format

inline std::string dump_pose_graph(const PoseGraph& g) {
  std::ostringstream os;
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Pose2& p = g.node(i);
    os << "VERTEX_SE2 " << i << ' ' << fmt_double(p.x) << ' ' << fmt_double(p.y) << ' '
       << fmt_double(p.theta) << '\n';
  }
  for (const GraphEdge& e : g.edges()) {
    const Eigen::Matrix3d& m = e.info;
    os << "EDGE_SE2 " << e.i << ' ' << e.j << ' ' << fmt_double(e.transform.x) << ' '
       << fmt_double(e.transform.y) << ' ' << fmt_double(e.transform.theta) << ' '
       << fmt_double(m(0, 0)) << ' ' << fmt_double(m(0, 1)) << ' ' << fmt_double(m(0, 2)) << ' '
       << fmt_double(m(1, 1)) << ' ' << fmt_double(m(1, 2)) << ' ' << fmt_double(m(2, 2)) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Grid exports

/// Text dump, one cell per line: "x y p_0 ... p_C".
inline std::string dump_grid_text(const SemanticGrid& grid) {
  std::ostringstream os;
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix) {
      os << ix << ' ' << iy;
      const Eigen::VectorXd p = grid.class_probabilities(grid.cell_index(ix, iy));
      for (int c = 0; c < p.size(); ++c) os << ' ' << fmt_double(p[c]);
      os << '\n';
    }
  return os.str();
}

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;

  Image(int w, int h, std::array<std::uint8_t, 3> fill = {255, 255, 255})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x >= 0 && x < width && y >= 0 && y < height)
      pixels[static_cast<std::size_t>(y) * width + x] = c;
  }

  void fill_rect(int x0, int y0, int w, int h, std::array<std::uint8_t, 3> c) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) set(x, y, c);
  }

  void line(int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

inline void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const auto& p : img.pixels) out.write(reinterpret_cast<const char*>(p.data()), 3);
}

/// One pixel per cell, colored by the argmax class through the world palette.
inline Image grid_snapshot(const SemanticGrid& grid, const std::vector<WorldClass>& palette) {
  if (static_cast<int>(palette.size()) != grid.num_classes() + 1)
    throw std::invalid_argument("palette size does not match class count");
  Image img(grid.width(), grid.height());
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix)
      img.set(ix, iy, palette[grid.argmax_class(grid.cell_index(ix, iy))].color);
  return img;
}

namespace detail {

inline Image label_background(const LabelGrid& labels, int scale) {
  Image img(labels.width * scale, labels.height * scale);
  for (int iy = 0; iy < labels.height; ++iy)
    for (int ix = 0; ix < labels.width; ++ix) {
      std::array<std::uint8_t, 3> c{255, 255, 255};
      if (labels.at(ix, iy) == CellLabel::occupied) c = {40, 40, 40};
      if (labels.at(ix, iy) == CellLabel::unknown) c = {200, 200, 200};
      img.fill_rect(ix * scale, iy * scale, scale, scale, c);
    }
  return img;
}

}  // namespace detail

/// True (green) vs estimated (red) trajectory over the explored map.
inline Image render_trajectory(const LabelGrid& labels, const RunLog& log, int scale = 8) {
  Image img = detail::label_background(labels, scale);
  auto px = [&](double m) { return static_cast<int>(m / labels.resolution * scale); };
  for (std::size_t i = 1; i < log.steps.size(); ++i) {
    img.line(px(log.steps[i - 1].true_pose.x), px(log.steps[i - 1].true_pose.y),
             px(log.steps[i].true_pose.x), px(log.steps[i].true_pose.y), {30, 160, 30});
  }
  for (std::size_t i = 1; i < log.steps.size(); ++i) {
    img.line(px(log.steps[i - 1].estimated_pose.x), px(log.steps[i - 1].estimated_pose.y),
             px(log.steps[i].estimated_pose.x), px(log.steps[i].estimated_pose.y), {200, 40, 40});
  }
  return img;
}

/// Pose-graph nodes and edges (odometry blue, loop closures orange).
inline Image render_pose_graph(const LabelGrid& labels, const PoseGraph& graph, int scale = 8) {
  Image img = detail::label_background(labels, scale);
  auto px = [&](double m) { return static_cast<int>(m / labels.resolution * scale); };
  for (const GraphEdge& e : graph.edges()) {
    const Pose2& a = graph.node(e.i);
    const Pose2& b = graph.node(e.j);
    const std::array<std::uint8_t, 3> color =
        e.kind == EdgeKind::loop ? std::array<std::uint8_t, 3>{230, 140, 20}
                                 : std::array<std::uint8_t, 3>{40, 70, 200};
    img.line(px(a.x), px(a.y), px(b.x), px(b.y), color);
  }
  for (const Pose2& n : graph.nodes())
    img.fill_rect(px(n.x) - 1, px(n.y) - 1, 3, 3, {10, 10, 10});
  return img;
}

/// Coverage curve: x = step index, y = explored m^2.
inline Image render_coverage(const std::vector<std::pair<int, double>>& series, int width = 480,
                             int height = 320) {
  Image img(width, height);
  const int margin = 30;
  img.line(margin, height - margin, width - 10, height - margin, {0, 0, 0});  // x axis
  img.line(margin, height - margin, margin, 10, {0, 0, 0});                   // y axis
  if (series.empty()) return img;
  const double max_x = std::max(1, series.back().first);
  double max_y = 1e-9;
  for (const auto& [t, v] : series) max_y = std::max(max_y, v);
  auto sx = [&](int t) { return margin + static_cast<int>((width - margin - 10) * t / max_x); };
  auto sy = [&](double v) {
    return height - margin - static_cast<int>((height - margin - 10) * v / max_y);
  };
  for (std::size_t i = 1; i < series.size(); ++i)
    img.line(sx(series[i - 1].first), sy(series[i - 1].second), sx(series[i].first),
             sy(series[i].second), {40, 70, 200});
  return img;
}

// ---------------------------------------------------------------------------
// Artifact parsers (for offline rendering)

inline RunLog parse_steps_csv(std::istream& in) {
  RunLog log;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    RunStep s;
    double tx, ty, tt, ex, ey, et, m2;
    if (!(row >> s.t >> tx >> ty >> tt >> ex >> ey >> et >> s.explored_cells >> m2))
      throw std::runtime_error("malformed steps.csv row: " + line);
    s.true_pose = Pose2(tx, ty, tt);
    s.estimated_pose = Pose2(ex, ey, et);
    log.steps.push_back(s);
  }
  return log;
}

inline PoseGraph parse_pose_graph(std::istream& in) {
  PoseGraph g;
  std::string tag;
  while (in >> tag) {
    if (tag == "VERTEX_SE2") {
      int id;
      double x, y, theta;
      if (!(in >> id >> x >> y >> theta)) throw std::runtime_error("malformed VERTEX_SE2 line");
      if (id != g.add_node(Pose2(x, y, theta)))
        throw std::runtime_error("VERTEX_SE2 ids must be dense and ordered");
    } else if (tag == "EDGE_SE2") {
      int i, j;
      double dx, dy, dtheta, i11, i12, i13, i22, i23, i33;
      if (!(in >> i >> j >> dx >> dy >> dtheta >> i11 >> i12 >> i13 >> i22 >> i23 >> i33))
        throw std::runtime_error("malformed EDGE_SE2 line");
      Eigen::Matrix3d info;
      info << i11, i12, i13, i12, i22, i23, i13, i23, i33;
      // the exchange format does not carry the edge kind; long-span edges
      // re-load as loops so renders keep the distinction
      if (j == i + 1)
        g.add_odometry_edge(i, j, Pose2(dx, dy, dtheta), info);
      else
        g.add_loop_edge(i, j, Pose2(dx, dy, dtheta), info);
    } else {
      throw std::runtime_error("unknown pose-graph record '" + tag + "'");
    }
  }
  return g;
}

/// Rebuilds a grid from the "x y p_0 ... p_C" text dump.
inline SemanticGrid parse_grid_text(std::istream& in, int width, int height, double resolution,
                                    int num_classes) {
  SemanticGrid grid = SemanticGrid::uniform(width, height, resolution, num_classes);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int ix, iy;
    if (!(row >> ix >> iy)) throw std::runtime_error("malformed map.txt row: " + line);
    Eigen::VectorXd p(num_classes + 1);
    for (int c = 0; c <= num_classes; ++c)
      if (!(row >> p[c])) throw std::runtime_error("malformed map.txt row: " + line);
    Eigen::VectorXd y(num_classes + 1);
    const double p0 = std::max(p[0], 1e-21);
    y[0] = 0.0;
    for (int c = 1; c <= num_classes; ++c) y[c] = std::log(std::max(p[c], 1e-21) / p0);
    grid.set_log_odds(grid.cell_index(ix, iy), y);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Run artifact bundle

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

/// Writes the deterministic artifact set of one run into `dir`.
inline void write_run_artifacts(const std::string& dir, const RunResult& result,
                                const GroundTruthWorld& world, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text(dir + "/steps.csv", steps_csv(result.log, world.resolution()));
  write_text(dir + "/decisions.csv", decisions_csv(result.decisions));
  write_text(dir + "/summary.csv", summary_csv(summarize_run(result, world, cfg)));
  write_text(dir + "/posegraph.txt", dump_pose_graph(result.graph));
  write_text(dir + "/map.txt", dump_grid_text(result.grid));
  write_text(dir + "/config.txt", dump_config(cfg));
  write_ppm(grid_snapshot(result.grid, world.palette()), dir + "/map.ppm");
}

}  // namespace semex
