#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semex/se2.hpp"
#include "semex/spectral.hpp"

namespace semex {

enum class EdgeKind { odometry, loop };

/// Relative-pose constraint between two nodes. `info` is the information
/// matrix of the measurement in its own frame (inverse covariance).
struct GraphEdge {
  int i = 0;
  int j = 0;
  Pose2 transform;
  Eigen::Matrix3d info = Eigen::Matrix3d::Identity();
  EdgeKind kind = EdgeKind::odometry;
};

namespace detail {

inline void check_spd(const Eigen::Matrix3d& m, const char* what) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument(std::string(what) + ": information matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument(std::string(what) + ": information matrix not positive definite");
}

}  // namespace detail

/// SE(2) pose graph: nodes are pose estimates, edges are noisy relative
/// transforms. Node `fixed` anchors the gauge.
class PoseGraph {
 public:
  int add_node(const Pose2& pose) {
    nodes_.push_back(pose);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void add_odometry_edge(int i, int j, const Pose2& transform, const Eigen::Matrix3d& info) {
    add_edge(i, j, transform, info, EdgeKind::odometry);
  }

  void add_loop_edge(int i, int j, const Pose2& transform, const Eigen::Matrix3d& info) {
    add_edge(i, j, transform, info, EdgeKind::loop);
  }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Pose2>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const Pose2& node(int id) const { return nodes_.at(id); }
  void set_node(int id, const Pose2& p) { nodes_.at(id) = p; }

  int fixed_node() const { return fixed_; }
  void set_fixed_node(int id) {
    if (id < 0 || id >= num_nodes()) throw std::out_of_range("fixed node does not exist");
    fixed_ = id;
  }

  bool connected() const {
    if (num_nodes() <= 1) return true;
    std::vector<int> parent(nodes_.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    int components = num_nodes();
    for (const auto& e : edges_) {
      int a = find(e.i), b = find(e.j);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    return components == 1;
  }

 private:
  void add_edge(int i, int j, const Pose2& transform, const Eigen::Matrix3d& info, EdgeKind kind) {
    if (i < 0 || i >= num_nodes() || j < 0 || j >= num_nodes())
      throw std::out_of_range("edge endpoint does not exist");
    if (i == j) throw std::invalid_argument("self edges are not allowed");
    detail::check_spd(info, kind == EdgeKind::loop ? "loop edge" : "odometry edge");
    edges_.push_back({i, j, transform, info, kind});
  }

  std::vector<Pose2> nodes_;
  std::vector<GraphEdge> edges_;
  int fixed_ = 0;
};

/// Residual of one edge at the current estimates, in the measurement frame.
inline Eigen::Vector3d edge_error(const PoseGraph& g, const GraphEdge& e) {
  const Pose2& xi = g.node(e.i);
  const Pose2& xj = g.node(e.j);
  const Eigen::Matrix2d ri_t = xi.rotation().transpose();
  const Eigen::Matrix2d rz_t = e.transform.rotation().transpose();
  Eigen::Vector3d err;
  err.head<2>() = rz_t * (ri_t * (xj.translation() - xi.translation()) - e.transform.translation());
  err[2] = wrap_angle(xj.theta - xi.theta - e.transform.theta);
  return err;
}

/// Least-squares objective: 1/2 sum e^T info e.
inline double graph_cost(const PoseGraph& g) {
  double cost = 0.0;
  for (const auto& e : g.edges()) {
    const Eigen::Vector3d err = edge_error(g, e);
    cost += 0.5 * err.dot(e.info * err);
  }
  return cost;
}

struct OptimizeOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-10;
};

struct OptimizeResult {
  PoseGraph graph;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton over the node estimates with analytic SE(2) Jacobians and
/// step halving on cost increase. The fixed node's block is removed from the
/// normal equations. Accepted iterations never increase the cost.
inline OptimizeResult optimize(const PoseGraph& input, const OptimizeOptions& opts = {}) {
  if (!input.connected())
    throw std::runtime_error("optimize: pose graph is disconnected (" +
                             std::to_string(input.num_nodes()) + " nodes, " +
                             std::to_string(input.num_edges()) + " edges)");
  OptimizeResult result;
  result.graph = input;
  result.initial_cost = graph_cost(input);
  result.final_cost = result.initial_cost;

  PoseGraph& g = result.graph;
  const int n = g.num_nodes();
  const int fixed = g.fixed_node();
  if (n <= 1) {
    result.converged = true;
    return result;
  }

  // maps node id -> index in the reduced system (fixed node removed)
  auto var_index = [&](int id) { return id < fixed ? id : id - 1; };
  const int dim = 3 * (n - 1);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

    for (const auto& e : g.edges()) {
      const Pose2& xi = g.node(e.i);
      const Pose2& xj = g.node(e.j);
      const Eigen::Matrix2d ri_t = xi.rotation().transpose();
      const Eigen::Matrix2d rz_t = e.transform.rotation().transpose();
      const Eigen::Vector2d dt = xj.translation() - xi.translation();

      const double c = std::cos(xi.theta), s = std::sin(xi.theta);
      Eigen::Matrix2d dri_t;  // d(R_i^T)/dtheta
      dri_t << -s, c, -c, -s;

      Eigen::Matrix3d ja = Eigen::Matrix3d::Zero();  // wrt node i
      ja.topLeftCorner<2, 2>() = -rz_t * ri_t;
      ja.block<2, 1>(0, 2) = rz_t * (dri_t * dt);
      ja(2, 2) = -1.0;
      Eigen::Matrix3d jb = Eigen::Matrix3d::Zero();  // wrt node j
      jb.topLeftCorner<2, 2>() = rz_t * ri_t;
      jb(2, 2) = 1.0;

      const Eigen::Vector3d err = edge_error(g, e);
      if (e.i != fixed) {
        const int a = 3 * var_index(e.i);
        h.block<3, 3>(a, a) += ja.transpose() * e.info * ja;
        b.segment<3>(a) += ja.transpose() * e.info * err;
      }
      if (e.j != fixed) {
        const int bj = 3 * var_index(e.j);
        h.block<3, 3>(bj, bj) += jb.transpose() * e.info * jb;
        b.segment<3>(bj) += jb.transpose() * e.info * err;
      }
      if (e.i != fixed && e.j != fixed) {
        const int a = 3 * var_index(e.i);
        const int bj = 3 * var_index(e.j);
        h.block<3, 3>(a, bj) += ja.transpose() * e.info * jb;
        h.block<3, 3>(bj, a) += jb.transpose() * e.info * ja;
      }
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd dx = ldlt.solve(-b);
    if (ldlt.info() != Eigen::Success || !dx.allFinite())
      throw std::runtime_error(
          "optimize: singular normal equations (gauge not fixed or graph underdetermined; " +
          std::to_string(n) + " nodes, " + std::to_string(g.num_edges()) + " edges)");

    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 20; ++half) {
      PoseGraph candidate = g;
      for (int id = 0; id < n; ++id) {
        if (id == fixed) continue;
        const int a = 3 * var_index(id);
        const Pose2& p = candidate.node(id);
        candidate.set_node(id, Pose2(p.x + scale * dx[a], p.y + scale * dx[a + 1],
                                     p.theta + scale * dx[a + 2]));
      }
      const double cost = graph_cost(candidate);
      if (cost <= result.final_cost) {
        g = std::move(candidate);
        result.final_cost = cost;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    ++result.iterations;
    if (!accepted || scale * dx.norm() < opts.step_tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

/// Fisher information of an edge expressed at the estimation frame:
/// Ad(T)^T info Ad(T). SPD is preserved; det(Ad) = 1 keeps the determinant.
inline Eigen::Matrix3d edge_fim(const GraphEdge& e) {
  const Eigen::Matrix3d ad = adjoint(e.transform);
  return ad.transpose() * e.info * ad;
}

enum class MatrixNorm { one, two, inf, frobenius };

inline MatrixNorm parse_norm(const std::string& s) {
  if (s == "1") return MatrixNorm::one;
  if (s == "2") return MatrixNorm::two;
  if (s == "inf") return MatrixNorm::inf;
  if (s == "fro") return MatrixNorm::frobenius;
  throw std::invalid_argument("unknown matrix norm '" + s + "' (use 1, 2, inf, fro)");
}

inline std::string norm_name(MatrixNorm p) {
  switch (p) {
    case MatrixNorm::one: return "1";
    case MatrixNorm::two: return "2";
    case MatrixNorm::inf: return "inf";
    case MatrixNorm::frobenius: return "fro";
  }
  return "?";
}

inline double matrix_norm(const Eigen::MatrixXd& m, MatrixNorm p) {
  switch (p) {
    case MatrixNorm::one:
      return m.cwiseAbs().colwise().sum().maxCoeff();
    case MatrixNorm::inf:
      return m.cwiseAbs().rowwise().sum().maxCoeff();
    case MatrixNorm::frobenius:
      return m.norm();
    case MatrixNorm::two: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
  }
  return 0.0;
}

/// Scalar weight of an edge for the Laplacian reduction: the chosen matrix
/// norm of its FIM, boosted by gamma_lc for loop-closure edges.
inline double edge_weight(const GraphEdge& e, MatrixNorm p, double gamma_lc) {
  const double w = matrix_norm(edge_fim(e), p);
  return e.kind == EdgeKind::loop ? gamma_lc * w : w;
}

/// Collapses the pose graph to its weighted topology.
inline WeightedGraph to_weighted_graph(const PoseGraph& g, MatrixNorm p, double gamma_lc) {
  WeightedGraph wg(g.num_nodes());
  for (const auto& e : g.edges()) wg.add_edge(e.i, e.j, edge_weight(e, p, gamma_lc));
  return wg;
}

/// D-optimality of the pose graph via its weighted Laplacian spectrum;
/// 0 when disconnected.
inline double graph_d_opt(const PoseGraph& g, MatrixNorm p, double gamma_lc) {
  return d_opt_laplacian(to_weighted_graph(g, p, gamma_lc));
}

/// Full 3n x 3n Fisher information, sum_k (a_k a_k^T) kron edge_fim(k).
/// Reference implementation for bound checks; oracle scale only.
inline Eigen::MatrixXd full_fim(const PoseGraph& g) {
  if (g.num_nodes() > 200) throw std::domain_error("full_fim: graph too large for the dense form");
  const int n = g.num_nodes();
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (const auto& e : g.edges()) {
    const Eigen::Matrix3d phi = edge_fim(e);
    f.block<3, 3>(3 * e.i, 3 * e.i) += phi;
    f.block<3, 3>(3 * e.j, 3 * e.j) += phi;
    f.block<3, 3>(3 * e.i, 3 * e.j) -= phi;
    f.block<3, 3>(3 * e.j, 3 * e.i) -= phi;
  }
  return f;
}

}  // namespace semex
