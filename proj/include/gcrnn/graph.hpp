#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gcrnn/errors.hpp"
#include "gcrnn/tensor.hpp"

namespace gcrnn {

using Point2 = std::array<double, 2>;

struct Edge {
  std::size_t from;
  std::size_t to;
  double weight;
};

/// Weighted directed graph over nodes 0..N-1. An undirected edge is stored as
/// the two ordered pairs. At most one weight per ordered pair.
class Graph {
 public:
  explicit Graph(std::size_t n_nodes) : n_(n_nodes) {
    detail::require(n_nodes > 0, "Graph: node count must be positive");
  }

  std::size_t n_nodes() const noexcept { return n_; }
  std::size_t n_edges() const noexcept { return weights_.size(); }

  void add_edge(std::size_t from, std::size_t to, double weight = 1.0) {
    detail::require(from < n_ && to < n_, "Graph::add_edge: node index out of range [0, " + std::to_string(n_) + ")");
    detail::require(std::isfinite(weight), "Graph::add_edge: weight must be finite");
    auto [it, inserted] = weights_.emplace(std::make_pair(from, to), weight);
    detail::require(inserted, "Graph::add_edge: duplicate edge (" + std::to_string(from) + ", " + std::to_string(to) + ")");
  }

  void add_undirected_edge(std::size_t a, std::size_t b, double weight = 1.0) {
    add_edge(a, b, weight);
    if (a != b) add_edge(b, a, weight);
  }

  bool has_edge(std::size_t from, std::size_t to) const { return weights_.count({from, to}) != 0; }

  double weight(std::size_t from, std::size_t to) const {
    auto it = weights_.find({from, to});
    return it == weights_.end() ? 0.0 : it->second;
  }

  /// Edges sorted by (from, to).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(weights_.size());
    for (const auto& [key, w] : weights_) out.push_back(Edge{key.first, key.second, w});
    return out;
  }

  /// In-neighborhood {j : (j, i) in E}, i.e. the nodes whose values reach i in one shift.
  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (const auto& [key, w] : weights_)
      if (key.second == i && key.first != i) out.push_back(key.first);
    return out;
  }

  /// Number of undirected edges, counting each symmetric pair once.
  std::size_t n_undirected_edges() const {
    std::size_t count = 0;
    for (const auto& [key, w] : weights_)
      if (key.first < key.second || (key.first > key.second && !has_edge(key.second, key.first))) ++count;
    return count;
  }

  bool is_symmetric() const {
    for (const auto& [key, w] : weights_)
      if (weight(key.second, key.first) != w) return false;
    return true;
  }

  const std::optional<std::vector<Point2>>& coordinates() const noexcept { return coordinates_; }
  void set_coordinates(std::vector<Point2> coords) {
    detail::require(coords.size() == n_, "Graph::set_coordinates: need one point per node");
    coordinates_ = std::move(coords);
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.weights_ == b.weights_ && a.coordinates_ == b.coordinates_;
  }

 private:
  std::size_t n_;
  std::map<std::pair<std::size_t, std::size_t>, double> weights_;
  std::optional<std::vector<Point2>> coordinates_;
};

enum class GsoKind { adjacency, normalized_adjacency };

inline std::string to_string(GsoKind kind) {
  return kind == GsoKind::adjacency ? "adjacency" : "normalized_adjacency";
}

inline GsoKind parse_gso_kind(const std::string& s) {
  if (s == "adjacency") return GsoKind::adjacency;
  if (s == "normalized_adjacency") return GsoKind::normalized_adjacency;
  throw InvalidArgument("unknown GSO kind '" + s + "' (expected adjacency | normalized_adjacency)");
}

/// Graph shift operator: dense N x N matrix with S(i, j) != 0 only if (j, i) is an edge.
struct Gso {
  Matrix matrix;
  GsoKind kind = GsoKind::adjacency;

  std::size_t n_nodes() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
};

// ------------------------------------------------------------------ generators

/// Undirected, unweighted stochastic block model with contiguous equal-size blocks.
inline Graph sbm_generate(std::size_t n, std::size_t n_communities, double p_intra, double p_inter,
                          std::uint64_t seed) {
  detail::require(n > 0 && n_communities > 0, "sbm_generate: node and community counts must be positive");
  detail::require(n % n_communities == 0, "sbm_generate: n = " + std::to_string(n) +
                                              " is not divisible by n_communities = " + std::to_string(n_communities));
  detail::require(p_intra >= 0.0 && p_intra <= 1.0 && p_inter >= 0.0 && p_inter <= 1.0,
                  "sbm_generate: probabilities must lie in [0, 1]");
  detail::require(p_inter <= p_intra, "sbm_generate: p_inter must not exceed p_intra");

  const std::size_t block = n / n_communities;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Graph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double p = (i / block == j / block) ? p_intra : p_inter;
      if (unit(rng) < p) g.add_undirected_edge(i, j);
    }
  }
  return g;
}

enum class KnnWeighting { unit, inverse_distance };

/// Connects every point to its k nearest neighbors (Euclidean, ties broken by
/// lower index) and symmetrizes by union. Coordinates are attached to the graph.
inline Graph knn_graph(const std::vector<Point2>& coordinates, std::size_t k,
                       KnnWeighting weighting = KnnWeighting::unit) {
  const std::size_t n = coordinates.size();
  detail::require(k > 0, "knn_graph: k must be positive");
  detail::require(n >= k + 1, "knn_graph: need at least k + 1 = " + std::to_string(k + 1) + " points, got " +
                                  std::to_string(n));
  for (const auto& p : coordinates)
    detail::require(std::isfinite(p[0]) && std::isfinite(p[1]), "knn_graph: coordinates must be finite");

  auto dist = [&](std::size_t a, std::size_t b) {
    return std::hypot(coordinates[a][0] - coordinates[b][0], coordinates[a][1] - coordinates[b][1]);
  };

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.emplace_back(dist(i, j), j);
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < k; ++r) pairs.insert(std::minmax(i, order[r].second));
  }

  Graph g(n);
  for (auto [a, b] : pairs) {
    double w = 1.0;
    if (weighting == KnnWeighting::inverse_distance) {
      double d = dist(a, b);
      w = d > 0.0 ? 1.0 / d : 1.0;
    }
    g.add_undirected_edge(a, b, w);
  }
  g.set_coordinates(coordinates);
  return g;
}

// ------------------------------------------------------------------ GSO algebra

/// Largest absolute eigenvalue. Symmetric matrices use power iteration on S^2
/// (immune to the +/- lambda pair of bipartite graphs), stopping once the
/// relative eigen-residual drops below `tol`; other matrices fall back to a
/// dense eigensolver.
inline double spectral_radius(const Matrix& s, double tol = 1e-10) {
  const Eigen::Index n = s.rows();
  detail::require(n == s.cols(), "spectral_radius: matrix must be square");
  if (s != s.transpose()) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(s), false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  if (s.cwiseAbs().maxCoeff() == 0.0) return 0.0;

  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + 0.01 * static_cast<double>(i) / static_cast<double>(n);
  x.normalize();
  double lambda2 = 0.0;
  for (int iter = 0; iter < 1000000; ++iter) {
    Vector y = s * (s * x);
    lambda2 = x.dot(y);
    double residual = (y - lambda2 * x).norm();
    double norm = y.norm();
    if (norm == 0.0) return 0.0;
    if (residual <= tol * std::abs(lambda2)) break;
    x = y / norm;
  }
  return std::sqrt(std::max(lambda2, 0.0));
}

inline Gso build_gso(const Graph& graph, GsoKind kind) {
  const auto n = static_cast<Eigen::Index>(graph.n_nodes());
  Gso gso{Matrix::Zero(n, n), kind};
  for (const Edge& e : graph.edges())
    gso.matrix(static_cast<Eigen::Index>(e.to), static_cast<Eigen::Index>(e.from)) = e.weight;
  if (kind == GsoKind::normalized_adjacency) {
    double rho = spectral_radius(gso.matrix);
    detail::require(rho > 0.0, "build_gso: zero spectral radius, cannot normalize an empty graph");
    gso.matrix /= rho;
  }
  return gso;
}

/// One shift: [Sx]_i = sum_j S(i, j) x_j. Also accepts N x F signal matrices.
inline Matrix graph_shift(const Gso& gso, const Matrix& x) {
  detail::require(x.rows() == gso.matrix.cols(), "graph_shift: signal has " + std::to_string(x.rows()) +
                                                     " rows, GSO is " + std::to_string(gso.matrix.rows()) + " x " +
                                                     std::to_string(gso.matrix.cols()));
  return gso.matrix * x;
}

inline Vector graph_shift(const Gso& gso, const Vector& x) {
  detail::require(x.size() == gso.matrix.cols(), "graph_shift: signal length " + std::to_string(x.size()) +
                                                     " does not match GSO size " + std::to_string(gso.matrix.cols()));
  return gso.matrix * x;
}

/// Nodes whose values can reach node i within k shifts (i itself included).
inline std::set<std::size_t> k_hop_neighborhood(const Graph& graph, std::size_t i, std::size_t k) {
  detail::require(i < graph.n_nodes(), "k_hop_neighborhood: node index out of range");
  std::vector<std::vector<std::size_t>> in(graph.n_nodes());
  for (const Edge& e : graph.edges()) in[e.to].push_back(e.from);

  std::set<std::size_t> seen{i};
  std::vector<std::size_t> frontier{i};
  for (std::size_t hop = 0; hop < k && !frontier.empty(); ++hop) {
    std::vector<std::size_t> next;
    for (auto v : frontier)
      for (auto u : in[v])
        if (seen.insert(u).second) next.push_back(u);
    frontier = std::move(next);
  }
  return seen;
}

// ------------------------------------------------------------------ edge list I/O

/// Plain-text edge list: first line N, then one `j i w` line per ordered pair.
inline void write_edge_list(std::ostream& os, const Graph& graph) {
  os << graph.n_nodes() << '\n';
  os << std::setprecision(17);
  for (const Edge& e : graph.edges()) os << e.from << ' ' << e.to << ' ' << e.weight << '\n';
}

inline Graph read_edge_list(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<Graph> graph;
  while (std::getline(is, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (!graph) {
      long long n = 0;
      if (!(ls >> n) || n <= 0) throw ParseError("expected a positive node count", line_no);
      graph.emplace(static_cast<std::size_t>(n));
    } else {
      long long j = -1, i = -1;
      double w = 0.0;
      if (!(ls >> j >> i >> w)) throw ParseError("expected `j i w`", line_no);
      std::string rest;
      if (ls >> rest) throw ParseError("trailing content '" + rest + "'", line_no);
      if (j < 0 || i < 0 || static_cast<std::size_t>(j) >= graph->n_nodes() ||
          static_cast<std::size_t>(i) >= graph->n_nodes())
        throw ParseError("node index out of range", line_no);
      if (graph->has_edge(static_cast<std::size_t>(j), static_cast<std::size_t>(i)))
        throw ParseError("duplicate edge", line_no);
      graph->add_edge(static_cast<std::size_t>(j), static_cast<std::size_t>(i), w);
    }
  }
  if (!graph) throw ParseError("empty edge list", 0);
  return std::move(*graph);
}

inline void save_edge_list(const std::string& path, const Graph& graph) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_edge_list(os, graph);
}

inline Graph load_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_edge_list(is);
}

}  // namespace gcrnn
