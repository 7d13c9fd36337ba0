#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hhar/hierarchy.hpp"
#include "support/fd_check.hpp"
#include "support/tree_gen.hpp"

#include <cstdio>
#include <fstream>
#include <set>

using namespace hhar;
using hhar::testing::max_grad_rel_error;
using hhar::testing::oracle_adjacency;
using hhar::testing::random_matrix;
using hhar::testing::random_tree_edges;

namespace {

// still / walking at top level; sitting / standing under still.
LabelHierarchy four_node() {
  return LabelHierarchy::from_edges({{"root", "still"},
                                     {"root", "walking"},
                                     {"still", "sitting"},
                                     {"still", "standing"}});
}

}  // namespace

TEST_CASE("ancestor-overlap adjacency on the four-node hierarchy") {
  LabelHierarchy h = four_node();
  REQUIRE(h.size() == 4);
  Matrix a = build_predefined_adjacency(h);
  const Index still = h.index_of("still");
  const Index walking = h.index_of("walking");
  const Index sitting = h.index_of("sitting");
  const Index standing = h.index_of("standing");

  CHECK(a(sitting, standing) == 1.0);
  CHECK(a(sitting, walking) == 0.5);
  CHECK(a(walking, sitting) == 1.0);  // asymmetric
  for (Index i = 0; i < 4; ++i) CHECK(a(i, i) == 0.0);
  CHECK(a(still, walking) == 1.0);
}

TEST_CASE("single-node hierarchy has an empty adjacency") {
  LabelHierarchy h = LabelHierarchy::from_edges({{"root", "only"}});
  Matrix a = build_predefined_adjacency(h);
  REQUIRE(a.rows() == 1);
  CHECK(a(0, 0) == 0.0);
  CHECK(normalize_adjacency(a) == Matrix::Identity(1, 1));
}

TEST_CASE("adjacency normalization hand cases") {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  CHECK(normalize_adjacency(a) == Matrix::Ones(2, 2));

  Matrix b(2, 2);
  b << 0, 2, 2, 0;
  CHECK(normalize_adjacency(b).isApprox(Matrix::Ones(2, 2), 1e-12));

  Matrix neg(2, 2);
  neg << 0, -1, 0, 0;
  CHECK_THROWS_AS(normalize_adjacency(neg), std::invalid_argument);
}

TEST_CASE("normalization is zero-degree safe") {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = 1.0;  // row 2 has zero degree
  Matrix n = normalize_adjacency(a);
  CHECK(n.allFinite());
  for (Index i = 0; i < 3; ++i) CHECK(n(i, i) >= 1.0);
}

TEST_CASE("predefined adjacency equals the brute-force oracle on random trees") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(50));
    auto edges = random_tree_edges(n, rng);
    LabelHierarchy h = LabelHierarchy::from_edges(edges);
    Matrix got = build_predefined_adjacency(h);
    Matrix want = oracle_adjacency(edges, h.names(), h.root());
    CHECK(got == want);  // exact, both sides are ratios of small integers
  }
}

TEST_CASE("A entries are at most one, equality iff ancestor-set inclusion") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(30));
    LabelHierarchy h = LabelHierarchy::from_edges(random_tree_edges(n, rng));
    Matrix a = build_predefined_adjacency(h);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        CHECK(a(i, j) <= 1.0);
        std::set<Index> hi(h.ancestors(i).begin(), h.ancestors(i).end());
        std::set<Index> hj(h.ancestors(j).begin(), h.ancestors(j).end());
        const bool included =
            std::includes(hj.begin(), hj.end(), hi.begin(), hi.end());
        CHECK((a(i, j) == 1.0) == included);
      }
    }
  }
}

TEST_CASE("adaptive adjacency of zero embeddings is uniform") {
  Tensor e1 = Tensor::variable(Matrix::Zero(3, 2));
  Tensor e2 = Tensor::variable(Matrix::Zero(3, 2));
  Matrix a = adaptive_adjacency(e1, e2).value();
  CHECK(a.isApprox(Matrix::Constant(3, 3, 1.0 / 3.0), 1e-15));
}

TEST_CASE("adaptive adjacency softmax hand case") {
  // e1 e2^T = I (2x2): rows softmax to [e/(e+1), 1/(e+1)].
  Tensor e1 = Tensor::variable(Matrix::Identity(2, 2));
  Tensor e2 = Tensor::variable(Matrix::Identity(2, 2));
  Matrix a = adaptive_adjacency(e1, e2).value();
  CHECK(a(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(a(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(a(1, 0) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(a(1, 1) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("adaptive adjacency gradient matches finite differences") {
  Rng rng(9);
  Tensor e1 = Tensor::variable(random_matrix(4, 3, rng));
  Tensor e2 = Tensor::variable(random_matrix(4, 3, rng));
  Tensor w = Tensor::constant(random_matrix(4, 4, rng));
  const Real err = max_grad_rel_error(
      [&] { return sum(mul(adaptive_adjacency(e1, e2), w)); }, {e1, e2});
  CHECK(err < 1e-4);
}

TEST_CASE("adaptive adjacency rejects mismatched embeddings") {
  Tensor e1 = Tensor::variable(Matrix::Zero(3, 2));
  Tensor e2 = Tensor::variable(Matrix::Zero(4, 2));
  CHECK_THROWS_AS(adaptive_adjacency(e1, e2), std::invalid_argument);
}

TEST_CASE("label-set expansion walks the root path") {
  LabelHierarchy h = four_node();
  Vector y = h.expand_label_set("sitting");
  CHECK(y(h.index_of("still")) == 1.0);
  CHECK(y(h.index_of("sitting")) == 1.0);
  CHECK(y(h.index_of("walking")) == 0.0);
  CHECK(y(h.index_of("standing")) == 0.0);

  // Non-leaf terminals are allowed.
  Vector w = h.expand_label_set("walking");
  CHECK(w.sum() == 1.0);
  CHECK(w(h.index_of("walking")) == 1.0);

  CHECK(h.expand_label_set("standing").sum() == 2.0);
  CHECK_THROWS_AS(h.expand_label_set("jogging"), std::invalid_argument);
}

TEST_CASE("label-set popcount equals root-exclusive depth") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(40));
    LabelHierarchy h = LabelHierarchy::from_edges(random_tree_edges(n, rng));
    for (Index v = 0; v < n; ++v)
      CHECK(h.expand_label_set(v).sum() == static_cast<Real>(h.depth(v)));
  }
}

TEST_CASE("edge file round-trip preserves node order") {
  LabelHierarchy h = four_node();
  const std::string path = "hierarchy_roundtrip.txt";
  h.save(path);
  LabelHierarchy back = LabelHierarchy::load(path);
  CHECK(back.names() == h.names());
  CHECK(back.root() == h.root());
  std::remove(path.c_str());
}

TEST_CASE("edge list validation") {
  using E = std::vector<std::pair<std::string, std::string>>;
  CHECK_THROWS_AS(LabelHierarchy::from_edges(E{}), std::invalid_argument);
  CHECK_THROWS_AS(LabelHierarchy::from_edges(E{{"a", "a"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      LabelHierarchy::from_edges(E{{"r", "a"}, {"r", "b"}, {"a", "b"}}),
      std::invalid_argument);  // two parents for b
  CHECK_THROWS_AS(LabelHierarchy::from_edges(E{{"r", "a"}, {"s", "b"}}),
                  std::invalid_argument);  // ambiguous root
  CHECK_THROWS_AS(LabelHierarchy::from_edges(E{{"r", "a"}, {"r", "a"}}),
                  std::invalid_argument);  // duplicate edge
  CHECK_THROWS_AS(
      LabelHierarchy::from_edges(E{{"a", "b"}, {"b", "c"}, {"c", "a"}}),
      std::invalid_argument);  // cycle
}

TEST_CASE("malformed hierarchy file lines are rejected with a line number") {
  const std::string path = "hierarchy_bad.txt";
  {
    std::ofstream out(path);
    out << "root\ta\n";
    out << "no_tab_here\n";
  }
  CHECK_THROWS_WITH_AS(LabelHierarchy::load(path),
                       doctest::Contains("line 2"), std::invalid_argument);
  std::remove(path.c_str());
}

TEST_CASE("graph pair construction is deterministic per seed") {
  LabelHierarchy h = four_node();
  Rng r1(7), r2(7);
  GraphPair g1 = build_graph_pair(h, 5, r1);
  GraphPair g2 = build_graph_pair(h, 5, r2);
  CHECK(g1.normalized == g2.normalized);
  CHECK(g1.source_embed.value() == g2.source_embed.value());
  CHECK(g1.target_embed.value() == g2.target_embed.value());
  CHECK(g1.source_embed.requires_grad());
}
