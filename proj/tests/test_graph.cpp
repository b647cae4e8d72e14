#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace gcrnn;
using gcrnn::testing::random_graph;
using gcrnn::testing::random_matrix;

namespace {

Graph path3() {
  Graph g(3);
  g.add_undirected_edge(0, 1);
  g.add_undirected_edge(1, 2);
  return g;
}

}  // namespace

TEST(Sbm, PaperSizedGraphHasFourBlocksOfFive) {
  Graph g = sbm_generate(20, 4, 0.8, 0.2, 7);
  EXPECT_EQ(g.n_nodes(), 20u);
  EXPECT_TRUE(g.is_symmetric());
  for (const Edge& e : g.edges()) {
    EXPECT_NE(e.from, e.to);
    EXPECT_EQ(e.weight, 1.0);
  }
}

TEST(Sbm, ProbabilityOneGivesCompleteGraph) {
  Graph g = sbm_generate(4, 1, 1.0, 1.0, 3);
  EXPECT_EQ(g.n_undirected_edges(), 6u);
}

TEST(Sbm, IntraAndInterDensityMatchProbabilities) {
  std::size_t intra = 0, inter = 0, intra_pairs = 0, inter_pairs = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Graph g = sbm_generate(20, 4, 0.8, 0.2, seed);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = i + 1; j < 20; ++j) {
        const bool same = i / 5 == j / 5;
        (same ? intra_pairs : inter_pairs)++;
        if (g.has_edge(i, j)) (same ? intra : inter)++;
      }
  }
  EXPECT_NEAR(static_cast<double>(intra) / static_cast<double>(intra_pairs), 0.8, 0.02);
  EXPECT_NEAR(static_cast<double>(inter) / static_cast<double>(inter_pairs), 0.2, 0.02);
}

TEST(Sbm, SameSeedSameGraph) {
  EXPECT_EQ(sbm_generate(20, 4, 0.8, 0.2, 11), sbm_generate(20, 4, 0.8, 0.2, 11));
  EXPECT_FALSE(sbm_generate(20, 4, 0.8, 0.2, 11) == sbm_generate(20, 4, 0.8, 0.2, 12));
}

TEST(Sbm, RejectsBadArguments) {
  EXPECT_THROW(sbm_generate(10, 4, 0.8, 0.2, 0), InvalidArgument);
  EXPECT_THROW(sbm_generate(20, 4, 1.2, 0.2, 0), InvalidArgument);
  EXPECT_THROW(sbm_generate(20, 4, 0.8, -0.1, 0), InvalidArgument);
  EXPECT_THROW(sbm_generate(20, 4, 0.2, 0.8, 0), InvalidArgument);
}

TEST(Knn, CollinearPointsFormAPath) {
  Graph g = knn_graph({{0, 0}, {1, 0}, {2, 0}}, 1);
  EXPECT_EQ(g.n_undirected_edges(), 2u);
  EXPECT_TRUE(g.has_edge(0, 1) && g.has_edge(1, 0));
  EXPECT_TRUE(g.has_edge(1, 2) && g.has_edge(2, 1));
  EXPECT_FALSE(g.has_edge(0, 2));
}

TEST(Knn, TwoPointsSingleEdge) {
  Graph g = knn_graph({{0, 0}, {3, 4}}, 1);
  EXPECT_EQ(g.n_undirected_edges(), 1u);
  EXPECT_TRUE(g.has_edge(0, 1));
}

TEST(Knn, MatchesBruteForceSelection) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point2> pts(8);
    for (auto& p : pts) p = {u(rng), u(rng)};
    Graph g = knn_graph(pts, 3);
    EXPECT_TRUE(g.is_symmetric());
    // Oracle: for each i, the 3 smallest distances by repeated minimum search.
    std::set<std::pair<std::size_t, std::size_t>> expected;
    for (std::size_t i = 0; i < 8; ++i) {
      std::vector<bool> taken(8, false);
      taken[i] = true;
      for (int r = 0; r < 3; ++r) {
        std::size_t best = 8;
        double best_d = 1e300;
        for (std::size_t j = 0; j < 8; ++j) {
          if (taken[j]) continue;
          double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1];
          double d = dx * dx + dy * dy;
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        taken[best] = true;
        expected.insert({std::min(i, best), std::max(i, best)});
      }
    }
    EXPECT_EQ(g.n_undirected_edges(), expected.size());
    for (auto [a, b] : expected) EXPECT_TRUE(g.has_edge(a, b));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_GE(g.neighbors(i).size(), 3u);
  }
}

TEST(Knn, DuplicatePointsBreakTiesByLowerIndex) {
  Graph g = knn_graph({{0, 0}, {1, 1}, {1, 1}, {1, 1}}, 1);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(1, 2));
  EXPECT_TRUE(g.has_edge(2, 3) || g.has_edge(1, 3));
  EXPECT_TRUE(g.has_edge(1, 3));  // node 3's nearest tie is node 1
}

TEST(Knn, InverseDistanceWeighting) {
  Graph g = knn_graph({{0, 0}, {2, 0}}, 1, KnnWeighting::inverse_distance);
  EXPECT_DOUBLE_EQ(g.weight(0, 1), 0.5);
}

TEST(Knn, RejectsTooFewPoints) {
  EXPECT_THROW(knn_graph({{0, 0}, {1, 0}}, 2), InvalidArgument);
}

TEST(Gso, CompleteGraphAdjacency) {
  Gso s = build_gso(sbm_generate(4, 1, 1.0, 1.0, 0), GsoKind::adjacency);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(s.matrix(i, j), i == j ? 0.0 : 1.0);
}

TEST(Gso, CompleteGraphNormalizedIsOneThird) {
  // K_n adjacency has largest eigenvalue n - 1.
  Gso s = build_gso(sbm_generate(4, 1, 1.0, 1.0, 0), GsoKind::normalized_adjacency);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(s.matrix(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-10);
}

TEST(Gso, PathAdjacencyIsTridiagonal) {
  Gso s = build_gso(path3(), GsoKind::adjacency);
  Matrix expected(3, 3);
  expected << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  EXPECT_EQ(s.matrix, expected);
}

TEST(Gso, DirectedEdgeFillsTargetRow) {
  Graph g(2);
  g.add_edge(0, 1, 2.5);
  Gso s = build_gso(g, GsoKind::adjacency);
  EXPECT_EQ(s.matrix(1, 0), 2.5);
  EXPECT_EQ(s.matrix(0, 1), 0.0);
}

TEST(Gso, NormalizedSpectralRadiusIsOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gso s = build_gso(sbm_generate(20, 4, 0.8, 0.2, seed), GsoKind::normalized_adjacency);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(s.matrix)};
    EXPECT_NEAR(eig.eigenvalues().cwiseAbs().maxCoeff(), 1.0, 1e-6);
  }
}

TEST(Gso, BipartiteGraphRadius) {
  // Star K_{1,3}: eigenvalues +/- sqrt(3), 0, 0.
  Graph g(4);
  for (std::size_t i = 1; i < 4; ++i) g.add_undirected_edge(0, i);
  EXPECT_NEAR(spectral_radius(build_gso(g, GsoKind::adjacency).matrix), std::sqrt(3.0), 1e-9);
}

TEST(Gso, EmptyGraphCannotBeNormalized) {
  EXPECT_THROW(build_gso(Graph(3), GsoKind::normalized_adjacency), InvalidArgument);
  EXPECT_NO_THROW(build_gso(Graph(3), GsoKind::adjacency));
}

TEST(Shift, ZeroOperatorGivesZero) {
  Gso s{Matrix::Zero(3, 3), GsoKind::adjacency};
  Vector x(3);
  x << 1, 2, 3;
  EXPECT_EQ(graph_shift(s, x), Vector::Zero(3));
}

TEST(Shift, PathMovesMassOneHop) {
  Vector x(3);
  x << 1, 0, 0;
  Vector expected(3);
  expected << 0, 1, 0;
  EXPECT_EQ(graph_shift(build_gso(path3(), GsoKind::adjacency), x), expected);
}

TEST(Shift, MatchesLoopMatVec) {
  std::mt19937_64 rng(1);
  Gso s{random_matrix(rng, 20, 20), GsoKind::adjacency};
  Vector x = random_matrix(rng, 20, 1).col(0);
  Vector y = graph_shift(s, x);
  for (int i = 0; i < 20; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 20; ++j) acc += s.matrix(i, j) * x(j);
    EXPECT_NEAR(y(i), acc, 1e-12);
  }
}

TEST(Shift, RejectsDimensionMismatch) {
  Gso s{Matrix::Zero(3, 3), GsoKind::adjacency};
  EXPECT_THROW(graph_shift(s, Vector(Vector::Zero(4))), InvalidArgument);
}

TEST(Shift, OnlyNeighborsMatter) {
  std::mt19937_64 rng(2);
  Graph g = sbm_generate(20, 4, 0.8, 0.2, 9);
  Gso s = build_gso(g, GsoKind::normalized_adjacency);
  for (std::size_t i = 0; i < 20; ++i) {
    Vector x = random_matrix(rng, 20, 1).col(0);
    Vector x2 = x;
    auto nb = g.neighbors(i);
    std::set<std::size_t> keep(nb.begin(), nb.end());
    keep.insert(i);
    for (std::size_t j = 0; j < 20; ++j)
      if (!keep.count(j)) x2(static_cast<Eigen::Index>(j)) += 10.0;
    EXPECT_EQ(graph_shift(s, x)(static_cast<Eigen::Index>(i)), graph_shift(s, x2)(static_cast<Eigen::Index>(i)));
  }
}

TEST(Shift, PermutationEquivariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Gso s = build_gso(random_graph(rng, 12), GsoKind::normalized_adjacency);
    Matrix p = gcrnn::testing::permutation_matrix(gcrnn::testing::random_permutation(rng, 12));
    Vector x = random_matrix(rng, 12, 1).col(0);
    Gso ps{p * s.matrix * p.transpose(), s.kind};
    EXPECT_LT((graph_shift(ps, Vector(p * x)) - p * graph_shift(s, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(KHop, ZeroHopsIsTheNodeItself) {
  Graph g = sbm_generate(20, 4, 0.8, 0.2, 1);
  EXPECT_EQ(k_hop_neighborhood(g, 7, 0), std::set<std::size_t>{7});
}

TEST(KHop, PathOneHop) {
  EXPECT_EQ(k_hop_neighborhood(path3(), 0, 1), (std::set<std::size_t>{0, 1}));
  EXPECT_EQ(k_hop_neighborhood(path3(), 0, 2), (std::set<std::size_t>{0, 1, 2}));
}

TEST(KHop, MatchesMatrixPowerSupport) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Graph g = sbm_generate(20, 4, 0.8, 0.2, seed);
    Matrix a = build_gso(g, GsoKind::adjacency).matrix;
    Matrix reach = Matrix::Identity(20, 20) + a + a * a;
    for (std::size_t i = 0; i < 20; ++i) {
      std::set<std::size_t> expected;
      for (std::size_t j = 0; j < 20; ++j)
        if (reach(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) expected.insert(j);
      EXPECT_EQ(k_hop_neighborhood(g, i, 2), expected);
    }
  }
}

TEST(KHop, RejectsBadNode) { EXPECT_THROW(k_hop_neighborhood(path3(), 3, 1), InvalidArgument); }

TEST(EdgeList, RoundTrip) {
  Graph g = knn_graph({{0, 0}, {0.3, 0.1}, {1, 1}, {0.7, 0.2}}, 2, KnnWeighting::inverse_distance);
  std::stringstream ss;
  write_edge_list(ss, g);
  Graph back = read_edge_list(ss);
  EXPECT_EQ(back.edges().size(), g.edges().size());
  for (const Edge& e : g.edges()) EXPECT_EQ(back.weight(e.from, e.to), e.weight);
}

TEST(EdgeList, Format) {
  std::stringstream ss;
  write_edge_list(ss, path3());
  EXPECT_EQ(ss.str(), "3\n0 1 1\n1 0 1\n1 2 1\n2 1 1\n");
}

TEST(EdgeList, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    std::istringstream is(text);
    try {
      read_edge_list(is);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{9999};
  };
  EXPECT_EQ(line_of("3\n0 1 1\n0 7 1\n"), 3u);
  EXPECT_EQ(line_of("3\n0 1\n"), 2u);
  EXPECT_EQ(line_of("x\n"), 1u);
  EXPECT_EQ(line_of("3\n0 1 1\n0 1 1\n"), 3u);
  EXPECT_EQ(line_of("3\n0 1 1 extra\n"), 2u);
}

TEST(Graph, RejectsDuplicateAndOutOfRangeEdges) {
  Graph g(3);
  g.add_edge(0, 1);
  EXPECT_THROW(g.add_edge(0, 1), InvalidArgument);
  EXPECT_THROW(g.add_edge(0, 3), InvalidArgument);
}
