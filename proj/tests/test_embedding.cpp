#include <gtest/gtest.h>

#include <cmath>

#include "specae/embedding.hpp"
#include "specae/model.hpp"
#include "test_support.hpp"

namespace specae {
namespace {

using testing::random_matrix;

Matrix features(const Matrix& x, const Matrix& xhat) {
  return reconstruction_features(Tensor::constant(x), Tensor::constant(xhat)).value();
}

TEST(ReconstructionFeatures, PerfectReconstruction) {
  Matrix f = features(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{1, 0}}));
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_NEAR(f(0, 1), 1.0, 1e-11);
}

TEST(ReconstructionFeatures, OrthogonalRows) {
  Matrix f = features(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}}));
  EXPECT_NEAR(f(0, 0), std::sqrt(2.0), 1e-11);
  EXPECT_EQ(f(0, 1), 0.0);
}

TEST(ReconstructionFeatures, ZeroRowStaysFinite) {
  Matrix f = features(Matrix::from_rows({{0, 0, 0}}), Matrix::from_rows({{0.3, -0.4, 0}}));
  EXPECT_TRUE(std::isfinite(f(0, 0)));
  EXPECT_TRUE(std::isfinite(f(0, 1)));
  EXPECT_NEAR(f(0, 0), 0.5 / kDivGuard, 1e-6 / kDivGuard);
  EXPECT_EQ(f(0, 1), 0.0);
}

TEST(ReconstructionFeatures, MatchesRowLoopOracle) {
  Rng rng(2);
  const Matrix x = random_matrix(7, 5, rng), xh = random_matrix(7, 5, rng);
  const Matrix f = features(x, xh);
  for (std::size_t i = 0; i < 7; ++i) {
    double nx = 0, nh = 0, nd = 0, dot = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      nx += x(i, j) * x(i, j);
      nh += xh(i, j) * xh(i, j);
      nd += (x(i, j) - xh(i, j)) * (x(i, j) - xh(i, j));
      dot += x(i, j) * xh(i, j);
    }
    EXPECT_NEAR(f(i, 0), std::sqrt(nd) / std::sqrt(nx), 1e-10);
    EXPECT_NEAR(f(i, 1), dot / std::sqrt(nx * nh), 1e-10);
  }
  EXPECT_THROW(features(x, Matrix(7, 4)), DimensionError);
}

TEST(ReconstructionFeatures, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  Tensor x = Tensor::parameter(random_matrix(5, 4, rng));
  Tensor xh = Tensor::parameter(random_matrix(5, 4, rng));
  const Matrix probe = random_matrix(5, 2, rng);
  auto f = [&] { return sum(mul(reconstruction_features(x, xh), Tensor::constant(probe))); };
  EXPECT_LE(testing::check_gradient(f, x).max_rel_error, 1e-4);
  EXPECT_LE(testing::check_gradient(f, xh).max_rel_error, 1e-4);
}

TEST(Assemble, SlicingRecoversInputs) {
  Rng rng(4);
  Tensor zx = Tensor::constant(random_matrix(6, 8, rng));
  Tensor zg = Tensor::constant(random_matrix(6, 8, rng));
  Tensor ex = Tensor::constant(random_matrix(6, 2, rng));
  Tensor eg = Tensor::constant(random_matrix(6, 2, rng));
  JointEmbedding e = assemble(zx, zg, ex, eg);
  EXPECT_EQ(e.layout.total(), 20u);
  EXPECT_EQ(e.z.cols(), 20u);
  EXPECT_EQ(e.segment(Segment::AttributeCode).value(), zx.value());
  EXPECT_EQ(e.segment(Segment::GraphCode).value(), zg.value());
  EXPECT_EQ(e.segment(Segment::AttributeError).value(), ex.value());
  EXPECT_EQ(e.segment(Segment::GraphError).value(), eg.value());
  EXPECT_EQ(e.layout.offset(Segment::GraphError), 18u);
}

TEST(Assemble, AblatedSegmentsHaveZeroWidth) {
  Rng rng(5);
  Tensor zx = Tensor::constant(random_matrix(3, 8, rng));
  Tensor ex = Tensor::constant(random_matrix(3, 2, rng));
  JointEmbedding s = assemble(zx, {}, ex, {});
  EXPECT_EQ(s.layout.total(), 10u);
  EXPECT_FALSE(s.segment(Segment::GraphCode).defined());
  EXPECT_EQ(s.segment(Segment::AttributeError).value(), ex.value());
  EXPECT_THROW(assemble({}, {}, {}, {}), ContractError);
  EXPECT_THROW(assemble(zx, Tensor::constant(Matrix(4, 8)), {}, {}), DimensionError);
}

TEST(Assemble, LayoutWidthsPerAblation) {
  TrainConfig cfg;
  EXPECT_EQ(SpecAEModel::layout_for(cfg).total(), 20u);
  cfg.ablation = Ablation::S;
  EXPECT_EQ(SpecAEModel::layout_for(cfg).total(), cfg.d1 + 2);
  cfg.ablation = Ablation::N;
  EXPECT_EQ(SpecAEModel::layout_for(cfg).total(), cfg.d2 + 2);
  cfg.ablation = Ablation::NR;
  EXPECT_EQ(SpecAEModel::layout_for(cfg).total(), cfg.d1 + cfg.d2);
  EXPECT_EQ(SpecAEModel::layout_for(cfg).width(Segment::AttributeError), 0u);
  EXPECT_EQ(SpecAEModel::layout_for(cfg).width(Segment::GraphError), 0u);
}

}  // namespace
}  // namespace specae
