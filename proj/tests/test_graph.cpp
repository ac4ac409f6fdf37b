#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "specae/graph.hpp"
#include "test_support.hpp"

namespace specae {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("specae_graph_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& body = {}) const {
    fs::path p = path_ / name;
    if (!body.empty()) std::ofstream(p) << body;
    return p;
  }

 private:
  fs::path path_;
};

AttributedGraph random_graph(std::size_t n, double p, std::size_t m, Rng& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  return AttributedGraph::build(testing::random_matrix(n, m, rng), std::move(edges));
}

TEST(Loader, ToyDatasetRoundTrip) {
  TempDir dir;
  auto content = dir.file("toy.content", "p1\t1\t0\tA\np2\t0\t1\tB\np3\t1\t1\tA\n");
  auto cites = dir.file("toy.cites", "p1\tp2\np2\tp1\np2\tp3\np3\tp3\np9\tp1\n");
  LoadReport rep;
  AttributedGraph g = load_citation_dataset(content, cites, &rep);
  EXPECT_EQ(g.n, 3u);
  EXPECT_EQ(g.m, 2u);
  EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_EQ(g.attributes, Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}));
  EXPECT_EQ(g.labels, (std::vector<std::string>{"A", "B", "A"}));
  EXPECT_EQ(rep.dropped_edges, 1u);
  EXPECT_EQ(rep.self_loops, 1u);
  EXPECT_EQ(rep.duplicate_edges, 1u);
}

TEST(Loader, ArityMismatchReportsLine) {
  TempDir dir;
  auto content = dir.file("bad.content", "a 1 0 X\nb 1 0 1 X\n");
  auto cites = dir.file("bad.cites", "a b\n");
  try {
    load_citation_dataset(content, cites);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.content:2"), std::string::npos) << e.what();
  }
}

TEST(Loader, DuplicateIdAndBadNumberAreParseErrors) {
  TempDir dir;
  auto cites = dir.file("x.cites", "a b\n");
  EXPECT_THROW(load_citation_dataset(dir.file("d.content", "a 1 X\na 0 Y\n"), cites), ParseError);
  EXPECT_THROW(load_citation_dataset(dir.file("n.content", "a 1 X\nb zz Y\n"), cites), ParseError);
  EXPECT_THROW(load_citation_dataset(dir.file("missing.content"), cites), ParseError);
}

TEST(Loader, WriteThenReloadIsIdempotent) {
  TempDir dir;
  Rng rng(3);
  AttributedGraph g = random_graph(12, 0.3, 5, rng);
  write_citation_dataset(g, dir.file("a.content"), dir.file("a.cites"));
  AttributedGraph h = load_citation_dataset(dir.file("a.content"), dir.file("a.cites"));
  EXPECT_EQ(h.edges, g.edges);
  EXPECT_EQ(h.attributes, g.attributes);
  EXPECT_EQ(h.node_ids, g.node_ids);
  write_citation_dataset(h, dir.file("b.content"), dir.file("b.cites"));
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir.file("a.content")), slurp(dir.file("b.content")));
  EXPECT_EQ(slurp(dir.file("a.cites")), slurp(dir.file("b.cites")));
}

TEST(Build, CanonicalizesEdges) {
  AttributedGraph g = AttributedGraph::build(Matrix(4, 1), {{2, 1}, {1, 2}, {3, 3}, {0, 3}});
  EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 3}, {1, 2}}));
  EXPECT_THROW(AttributedGraph::build(Matrix(2, 1), {{0, 5}}), DimensionError);
}

TEST(Normalize, PathOfThree) {
  AttributedGraph g = AttributedGraph::build(Matrix(3, 1), {{0, 1}, {1, 2}});
  PropagationMatrix s = normalize_propagation(g);
  EXPECT_NEAR(s.at(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(s.at(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.at(0, 0), 0.5, 1e-15);
  EXPECT_EQ(s.at(0, 2), 0.0);
}

TEST(Normalize, IsolatedNodeKeepsSelfLoop) {
  AttributedGraph g = AttributedGraph::build(Matrix(2, 1), {});
  PropagationMatrix s = normalize_propagation(g);
  EXPECT_EQ(s.dense(), Matrix::identity(2));
}

TEST(Normalize, MatchesDenseOracleAndIsSymmetric) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    AttributedGraph g = random_graph(25, 0.15, 3, rng);
    const Matrix oracle = testing::dense_normalized_adjacency(g.n, g.edges);
    const Matrix dense = normalize_propagation(g).dense();
    EXPECT_LE(testing::max_abs_diff(dense, oracle), 1e-12);
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j) EXPECT_EQ(dense(i, j), dense(j, i));
  }
}

TEST(Normalize, SqrtDegreeIsEigenvectorWithEigenvalueOne) {
  Rng rng(23);
  AttributedGraph g = random_graph(30, 0.1, 2, rng);
  PropagationMatrix s = normalize_propagation(g);
  Matrix v(g.n, 1);
  for (std::size_t i = 0; i < g.n; ++i) v(i, 0) = std::sqrt(s.degree()[i]);
  Matrix sv(g.n, 1);
  s.multiply_acc(v, sv);
  EXPECT_LE(testing::max_abs_diff(sv, v), 1e-12);
}

TEST(Propagate, MatchesDenseProductAndGradient) {
  Rng rng(29);
  AttributedGraph g = random_graph(10, 0.3, 4, rng);
  PropagationMatrix s = normalize_propagation(g);
  Tensor x = Tensor::parameter(testing::random_matrix(10, 4, rng));
  EXPECT_LE(testing::max_abs_diff(propagate(s, x).value(), testing::dense_matmul(s.dense(), x.value())), 1e-12);
  const Matrix w = testing::random_matrix(10, 4, rng);
  auto f = [&] { return sum(mul(propagate(s, tanh(x)), Tensor::constant(w))); };
  EXPECT_LE(testing::check_gradient(f, x).max_rel_error, 1e-4);
  EXPECT_THROW(propagate(s, Tensor::constant(Matrix(3, 4))), DimensionError);
}

}  // namespace
}  // namespace specae
