#include <filesystem>
#include <fstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "topickg/distributions.hpp"
#include "topickg/error.hpp"
#include "topickg/taxonomy.hpp"

using namespace topickg;
namespace fs = std::filesystem;

namespace {

std::size_t id_of(const TopicTree& t, const std::string& name, std::size_t layer) {
  for (std::size_t i = 0; i < t.nodes.size(); ++i)
    if (t.nodes[i].name == name && t.nodes[i].layer == layer) return i;
  ADD_FAILURE() << "no node " << name << " at layer " << layer;
  return 0;
}

bool has_edge(const TopicTree& t, std::size_t p, std::size_t c) {
  return std::find(t.edges.begin(), t.edges.end(), std::pair{p, c}) != t.edges.end();
}

// Random layered tree: every non-root node gets one parent in the layer above.
TopicTree random_tree(Rng& rng, const std::vector<std::size_t>& sizes, double concept_prob) {
  TopicTree t;
  for (std::size_t l = 0; l < sizes.size(); ++l)
    for (std::size_t i = 0; i < sizes[l]; ++i) t.nodes.push_back({"n" + std::to_string(l) + "_" + std::to_string(i), l, ""});
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t up = off + sizes[l];
    for (std::size_t i = 0; i < sizes[l]; ++i) t.edges.emplace_back(up + rng.next() % sizes[l + 1], off + i);
    off = up;
  }
  for (std::size_t id = sizes[0]; id < t.nodes.size(); ++id)
    for (std::size_t w = 0; w < sizes[0]; ++w)
      if (rng.uniform() < concept_prob) t.concepts.emplace_back(id, w);
  return t;
}

}  // namespace

TEST(BuildTree, FurnitureChain) {
  BuildReport rep;
  TopicTree t = build_tree({"bed", "bunkbed"}, {{"bed", "furniture"}, {"bunkbed", "bed"}}, 2, &rep);
  EXPECT_EQ(t.num_layers(), 2u);
  const std::size_t bunkbed = id_of(t, "bunkbed", 0), bed_topic = id_of(t, "bed", 1),
                    furniture_top = id_of(t, "furniture", 2);
  EXPECT_TRUE(has_edge(t, bed_topic, bunkbed));
  EXPECT_TRUE(has_edge(t, furniture_top, bed_topic));
  EXPECT_TRUE(rep.unmatched_words.empty());
  EXPECT_EQ(t.layer_sizes().back(), 1u);
  // The word "bed" is a concept of the topic "bed".
  EXPECT_NE(std::find(t.concepts.begin(), t.concepts.end(), std::pair{bed_topic, id_of(t, "bed", 0)}), t.concepts.end());
}

TEST(BuildTree, UnmatchedWordsReportedAndLeftWithoutParent) {
  BuildReport rep;
  TopicTree t = build_tree({"cat", "zebra", "dog"}, {{"cat", "animal"}, {"dog", "animal"}}, 1, &rep);
  EXPECT_EQ(rep.unmatched_words, (std::vector<std::string>{"zebra"}));
  for (const auto& [p, c] : t.edges) EXPECT_NE(c, 1u);
  EXPECT_EQ(rep.layer_sizes, (std::vector<std::size_t>{3, 1}));
}

TEST(BuildTree, LongChainsCollapseIntoSingleRoot) {
  TopicTree t = build_tree({"a", "b"}, {{"a", "p1"}, {"p1", "p2"}, {"p2", "p3"}, {"p3", "p4"}, {"b", "q1"}, {"q1", "p4"}}, 2);
  EXPECT_EQ(t.layer_sizes().back(), 1u);
  for (const auto& n : t.nodes) EXPECT_LE(n.layer, 2u);
  EXPECT_NO_THROW(t.validate());
}

TEST(BuildTree, SeparateTopsGetSyntheticRoot) {
  TopicTree t = build_tree({"a", "b"}, {{"a", "x"}, {"b", "y"}}, 2);
  EXPECT_EQ(t.layer_sizes().back(), 1u);
  EXPECT_EQ(t.nodes.back().name, "<root>");
}

TEST(BuildTree, CycleIsReported) {
  try {
    build_tree({"a"}, {{"a", "b"}, {"b", "c"}, {"c", "a"}}, 2);
    FAIL();
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cycle"), std::string::npos);
    EXPECT_NE(msg.find("a"), std::string::npos);
  }
}

TEST(BuildTree, EmptyIntersection) { EXPECT_THROW(build_tree({"a"}, {{"x", "y"}}, 1), DomainError); }

TEST(BuildTree, DefinitionsDriveConcepts) {
  TopicTree t = build_tree({"bed", "sofa", "chair"}, {{"bed", "furniture"}, {"sofa", "furniture"}}, 1, nullptr,
                           {{"furniture", "sofa and chair"}});
  const std::size_t f = id_of(t, "furniture", 1);
  std::vector<std::size_t> words;
  for (auto [topic, w] : t.concepts)
    if (topic == f) words.push_back(w);
  EXPECT_EQ(words, (std::vector<std::size_t>{1, 2}));
}

TEST(TreeFile, RoundTripIsExact) {
  Rng rng(3);
  TopicTree t = random_tree(rng, {12, 5, 2, 1}, 0.1);
  t.nodes[13].definition = "some free text here";
  const fs::path p = fs::temp_directory_path() / "topickg_tree_roundtrip.tree";
  write_tree(t, p);
  TopicTree r = read_tree(p);
  EXPECT_EQ(r, t);
  GraphMatrices a = to_matrices(t), b = to_matrices(r);
  for (std::size_t l = 0; l < a.S.size(); ++l) {
    EXPECT_EQ(std::vector<double>(a.S[l].values().begin(), a.S[l].values().end()),
              std::vector<double>(b.S[l].values().begin(), b.S[l].values().end()));
    EXPECT_EQ(std::vector<double>(a.C[l].values().begin(), a.C[l].values().end()),
              std::vector<double>(b.C[l].values().begin(), b.C[l].values().end()));
  }
  fs::remove(p);
}

TEST(TreeFile, ParseErrorHasLine) {
  const fs::path p = fs::temp_directory_path() / "topickg_tree_bad.tree";
  std::ofstream(p) << "NODE 0 0 a\nNODE 1 1 t\nEDGE 1 7\n";
  try {
    read_tree(p);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  fs::remove(p);
}

TEST(Matrices, ChainOfThreeHasSevenNonzeros) {
  TopicTree t;
  t.nodes = {{"w", 0, ""}, {"t1", 1, ""}, {"t2", 2, ""}};
  t.edges = {{1, 0}, {2, 1}};
  GraphMatrices m = to_matrices(t);
  std::size_t nz = 0;
  for (double v : m.adjacency.values()) nz += v != 0.0;
  EXPECT_EQ(nz, 7u);
  EXPECT_DOUBLE_EQ(m.S[0].at(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.S[1].at(0, 0), 1.0);
}

TEST(Matrices, TwoNodeClosedForm) {
  TopicTree t;
  t.nodes = {{"w", 0, ""}, {"t", 1, ""}};
  t.edges = {{1, 0}};
  GraphMatrices m = to_matrices(t);
  for (double v : m.normalized.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Matrices, EveryAdjacencyEntryComesFromStructure) {
  Rng rng(6);
  TopicTree t = random_tree(rng, {15, 6, 3, 1}, 0.15);
  GraphMatrices m = to_matrices(t);
  const std::size_t N = m.num_nodes(), V = m.layer_sizes[0];
  std::vector<int> from(N * N, 0);
  for (std::size_t l = 1; l < m.layer_sizes.size(); ++l) {
    for (std::size_t i = 0; i < m.layer_sizes[l - 1]; ++i)
      for (std::size_t k = 0; k < m.layer_sizes[l]; ++k)
        if (m.S[l - 1].at(i, k) != 0) {
          from[(m.offset(l - 1) + i) * N + m.offset(l) + k] = 1;
          from[(m.offset(l) + k) * N + m.offset(l - 1) + i] = 1;
        }
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t k = 0; k < m.layer_sizes[l]; ++k)
        if (m.C[l - 1].at(v, k) != 0) {
          from[v * N + m.offset(l) + k] = 1;
          from[(m.offset(l) + k) * N + v] = 1;
        }
  }
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const double a = m.adjacency.at(i, j);
      if (i == j) EXPECT_EQ(a, 1.0);
      else EXPECT_EQ(a, double(from[i * N + j])) << i << ',' << j;
    }
}

TEST(Matrices, NormalizedIsSymmetricWithSpectrumInUnitInterval) {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    TopicTree t = random_tree(rng, {25, 12, 6, 3, 1}, 0.05);
    GraphMatrices m = to_matrices(t);
    const std::size_t N = m.num_nodes();
    ASSERT_LE(N, 50u);
    Eigen::MatrixXd a(N, N);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) a(i, j) = m.normalized.at(i, j);
    EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1.0 - 1e-12);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Adaptive, IdenticalColumnsGiveUniformRows) {
  Tensor e = Tensor::from({2, 4}, {1, 1, 1, 1, 2, 2, 2, 2});
  Tensor a = adaptive_adjacency(e);
  for (double v : a.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Adaptive, OrthogonalPair) {
  Tensor a = adaptive_adjacency(Tensor::from({2, 2}, {1, 0, 0, 1}));
  const double hi = std::exp(1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(a.at(0, 0), hi, 1e-12);
  EXPECT_NEAR(a.at(0, 1), 1 - hi, 1e-12);
  EXPECT_NEAR(hi, 0.731, 1e-3);
}

TEST(Adaptive, RowsSumToOneAndZeroColumnScoresZero) {
  Rng rng(2);
  Tensor e = rng.normal_tensor({5, 30}, 0, 1);
  for (std::size_t r = 0; r < 5; ++r) e.mutable_values()[r * 30 + 7] = 0.0;
  Tensor a = adaptive_adjacency(e);
  for (std::size_t i = 0; i < 30; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 30; ++j) s += a.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  // Row 7 scores cosine 0 everywhere, so it is uniform.
  for (std::size_t j = 0; j < 30; ++j) EXPECT_NEAR(a.at(7, j), 1.0 / 30, 1e-15);
}

TEST(Adaptive, PermutationEquivariant) {
  Rng rng(4);
  Tensor e = rng.normal_tensor({3, 9}, 0, 1);
  auto perm = rng.permutation(9);
  Tensor ep = Tensor::zeros({3, 9});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 9; ++j) ep.mutable_values()[r * 9 + j] = e.at(r, perm[j]);
  Tensor a = adaptive_adjacency(e), ap = adaptive_adjacency(ep);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(ap.at(i, j), a.at(perm[i], perm[j]), 1e-15);
}

TEST(Revise, AddsElementwise) {
  Tensor n = Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5});
  Tensor r = revise_adjacency(n, Tensor::zeros({2, 2}));
  for (double v : r.values()) EXPECT_DOUBLE_EQ(v, 0.5);
  r = revise_adjacency(n, n);
  for (double v : r.values()) EXPECT_DOUBLE_EQ(v, 1.0);
  Rng rng(1);
  Tensor ada = adaptive_adjacency(rng.normal_tensor({3, 2}, 0, 1));
  r = revise_adjacency(n, ada);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_GE(r.values()[i], n.values()[i]);
  EXPECT_THROW(revise_adjacency(n, Tensor::zeros({3, 3})), ShapeError);
}
