#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace semex {

/// Undirected weighted graph over nodes 0..n-1. Edge direction is discarded:
/// the Laplacian generator a_k a_k^T is orientation-invariant.
class WeightedGraph {
 public:
  struct Edge {
    int u = 0;
    int v = 0;
    double weight = 0.0;
  };

  explicit WeightedGraph(int num_nodes = 0) : n_(num_nodes) {
    if (num_nodes < 0) throw std::invalid_argument("negative node count");
  }

  int num_nodes() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  void add_edge(int u, int v, double weight) {
    if (u < 0 || u >= n_ || v < 0 || v >= n_) throw std::out_of_range("edge endpoint out of range");
    if (u == v) throw std::invalid_argument("self-loops are not allowed");
    if (weight <= 0.0) throw std::invalid_argument("edge weight must be positive");
    edges_.push_back({u, v, weight});
  }

  bool connected() const {
    if (n_ <= 1) return true;
    std::vector<int> parent(n_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    int components = n_;
    for (const Edge& e : edges_) {
      const int a = find(e.u), b = find(e.v);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    return components == 1;
  }

 private:
  int n_;
  std::vector<Edge> edges_;
};

/// L = sum_k w_k a_k a_k^T. Symmetric PSD with zero row sums; rank n-1 iff
/// the graph is connected.
inline Eigen::MatrixXd laplacian(const WeightedGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    l(e.u, e.u) += e.weight;
    l(e.v, e.v) += e.weight;
    l(e.u, e.v) -= e.weight;
    l(e.v, e.u) -= e.weight;
  }
  return l;
}

/// Weighted spanning-tree count in the log domain; `connected` is false when
/// the count is zero (log would be -inf).
struct SpanningTreeCount {
  bool connected = false;
  double log_count = -std::numeric_limits<double>::infinity();
};

/// log S(G) via the Kirchhoff cofactor: log det of the Laplacian with row and
/// column 0 deleted, evaluated by Cholesky.
inline SpanningTreeCount spanning_tree_count(const WeightedGraph& g) {
  if (!g.connected()) return {};
  if (g.num_nodes() <= 1) return {true, 0.0};

  const int n = g.num_nodes();
  const Eigen::MatrixXd reduced = laplacian(g).bottomRightCorner(n - 1, n - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(reduced);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("reduced Laplacian not positive definite");
  double log_det = 0.0;
  for (int i = 0; i < n - 1; ++i) log_det += std::log(llt.matrixL()(i, i));
  return {true, 2.0 * log_det};
}

/// log S(G) via the spectrum: sum of the logs of the n-1 nonzero Laplacian
/// eigenvalues minus log n. Second route for cross-checking the cofactor.
inline SpanningTreeCount spanning_tree_count_spectrum(const WeightedGraph& g) {
  if (!g.connected()) return {};
  if (g.num_nodes() <= 1) return {true, 0.0};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian(g), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();  // ascending; ev[0] ~ 0
  double log_prod = 0.0;
  for (int i = 1; i < ev.size(); ++i) {
    if (ev[i] <= 0.0) throw std::runtime_error("connected Laplacian has nonpositive eigenvalue");
    log_prod += std::log(ev[i]);
  }
  return {true, log_prod - std::log(static_cast<double>(g.num_nodes()))};
}

/// Geometric mean of a positive spectrum, exp(mean log lambda).
inline double d_opt_eigen(const std::vector<double>& eigenvalues) {
  if (eigenvalues.empty()) throw std::domain_error("empty spectrum");
  double sum_log = 0.0;
  for (double lambda : eigenvalues) {
    if (lambda <= 0.0) throw std::domain_error("D-optimality needs a positive spectrum");
    sum_log += std::log(lambda);
  }
  return std::exp(sum_log / static_cast<double>(eigenvalues.size()));
}

/// D-optimality of a graph Laplacian, (n S(G))^{1/n}, evaluated in the log
/// domain. Disconnected (or degenerate single-node) graphs score 0: a broken
/// estimation graph carries no determinant information.
inline double d_opt_laplacian(const WeightedGraph& g) {
  if (g.num_nodes() < 2) return 0.0;
  const SpanningTreeCount s = spanning_tree_count(g);
  if (!s.connected) return 0.0;
  const double n = static_cast<double>(g.num_nodes());
  return std::exp((std::log(n) + s.log_count) / n);
}

/// Second-smallest Laplacian eigenvalue; zero iff the graph is disconnected.
inline double algebraic_connectivity(const WeightedGraph& g) {
  if (g.num_nodes() < 2) throw std::domain_error("algebraic connectivity needs n >= 2");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian(g), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[1];
}

}  // namespace semex
