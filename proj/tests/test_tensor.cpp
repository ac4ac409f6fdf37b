#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "specae/optim.hpp"
#include "specae/tensor.hpp"
#include "test_support.hpp"

namespace specae {
namespace {

using testing::check_gradient;
using testing::random_matrix;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  Tensor out = matmul(Tensor::constant(Matrix::identity(2)), Tensor::constant(m));
  EXPECT_EQ(out.value(), m);
}

TEST(Matmul, HandArithmetic) {
  Tensor out = matmul(Tensor::constant(Matrix::from_rows({{1, 2}, {3, 4}})),
                      Tensor::constant(Matrix::from_rows({{1}, {1}})));
  EXPECT_EQ(out.value(), Matrix::from_rows({{3}, {7}}));
}

TEST(Matmul, ZeroAnnihilates) {
  Rng rng(1);
  Tensor out = matmul(Tensor::constant(Matrix(3, 4)), Tensor::constant(random_matrix(4, 2, rng)));
  EXPECT_EQ(out.value(), Matrix(3, 2));
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::constant(Matrix(2, 3)), Tensor::constant(Matrix(2, 3))), DimensionError);
}

TEST(Matmul, AssociativeOnWellScaledInputs) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = Tensor::constant(random_matrix(5, 4, rng));
    Tensor b = Tensor::constant(random_matrix(4, 6, rng));
    Tensor c = Tensor::constant(random_matrix(6, 3, rng));
    EXPECT_LE(testing::max_abs_diff(matmul(matmul(a, b), c).value(), matmul(a, matmul(b, c)).value()), 1e-10);
  }
}

TEST(Elementwise, Examples) {
  EXPECT_EQ(relu(Tensor::constant(Matrix::from_rows({{-1, 2}}))).value(), Matrix::from_rows({{0, 2}}));
  EXPECT_EQ(scale(Tensor::constant(Matrix::from_rows({{1, 2}})), 3).value(), Matrix::from_rows({{3, 6}}));
  EXPECT_EQ(exp(Tensor::constant(Matrix::from_rows({{0}}))).value(), Matrix::from_rows({{1}}));
}

TEST(Elementwise, DomainErrors) {
  EXPECT_THROW(log(Tensor::constant(Matrix::from_rows({{1, -0.5}}))), DomainError);
  EXPECT_THROW(sqrt(Tensor::constant(Matrix::from_rows({{-2}}))), DomainError);
}

TEST(Elementwise, BroadcastShapes) {
  Tensor a = Tensor::constant(Matrix::from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(add(a, Tensor::constant(Matrix::from_rows({{10, 20}}))).value(), Matrix::from_rows({{11, 22}, {13, 24}}));
  EXPECT_EQ(add(a, Tensor::constant(Matrix::from_rows({{10}, {20}}))).value(),
            Matrix::from_rows({{11, 12}, {23, 24}}));
  EXPECT_EQ(mul(a, Tensor::scalar(2)).value(), Matrix::from_rows({{2, 4}, {6, 8}}));
  EXPECT_THROW(add(a, Tensor::constant(Matrix(3, 1))), DimensionError);
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor w = Tensor::parameter(Matrix(2, 2, 1.0));
  EXPECT_THROW(backward(w), ContractError);
}

TEST(Backward, SumGivesAllOnes) {
  Tensor w = Tensor::parameter(Matrix(3, 4, 0.25));
  backward(sum(w));
  EXPECT_EQ(w.grad(), Matrix(3, 4, 1.0));
}

TEST(Backward, SquareAnalyticDerivative) {
  Tensor w = Tensor::parameter(Matrix::from_rows({{3}}));
  backward(sum(mul(w, w)));
  EXPECT_DOUBLE_EQ(w.grad()(0, 0), 6.0);
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
  Tensor w = Tensor::parameter(Matrix::from_rows({{1, 2}}));
  backward(sum(w));
  backward(sum(w));
  EXPECT_EQ(w.grad(), Matrix(1, 2, 2.0));
  w.zero_grad();
  EXPECT_EQ(w.grad(), Matrix(1, 2, 0.0));
}

TEST(Tape, DiamondVisitsEachNodeOnceAfterItsInputs) {
  Tensor w = Tensor::parameter(Matrix::from_rows({{0.5, -1.0}}));
  Tensor a = tanh(w);
  Tensor b = square(w);
  Tensor c = mul(a, b);
  Tensor loss = sum(add(c, a));
  ComputationTape tape(loss);
  const auto& order = tape.order();
  std::set<const detail::Node*> unique(order.begin(), order.end());
  EXPECT_EQ(unique.size(), order.size());
  EXPECT_EQ(order.size(), 6u);  // w, tanh, square, mul, add, sum
  for (std::size_t i = 0; i < order.size(); ++i)
    for (const auto& in : order[i]->inputs) {
      auto pos = std::find(order.begin(), order.end(), in.get());
      ASSERT_NE(pos, order.end());
      EXPECT_LT(static_cast<std::size_t>(pos - order.begin()), i);
    }
  EXPECT_EQ(order.back(), loss.node().get());
  tape.backward();
  // d/dw [tanh(w) w^2 + tanh(w)]
  for (std::size_t j = 0; j < 2; ++j) {
    const double x = w(0, j), t = std::tanh(x), dt = 1 - t * t;
    EXPECT_NEAR(w.grad()(0, j), dt * x * x + t * 2 * x + dt, 1e-14);
  }
}

TEST(Tape, ConstantsAreNotRecorded) {
  Tensor c = Tensor::constant(Matrix(2, 2, 1.0));
  Tensor w = Tensor::parameter(Matrix(2, 2, 1.0));
  ComputationTape tape(sum(add(mul(c, c), w)));
  for (const auto* n : tape.order()) EXPECT_TRUE(n->requires_grad);
}

TEST(Backward, DeterministicBitForBit) {
  auto run = [] {
    Rng rng(11);
    Tensor w = Tensor::parameter(random_matrix(5, 4, rng));
    Tensor x = Tensor::constant(random_matrix(6, 5, rng));
    backward(sum(tanh(matmul(x, w))));
    return w.grad();
  };
  EXPECT_EQ(run(), run());
}

// Each differentiable op against central differences on random 5x4 inputs.
struct OpCase {
  std::string name;
  std::function<Tensor(const Tensor&, const Tensor&)> fn;
  std::size_t b_rows, b_cols;
  double lo = -1.0, hi = 1.0;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase& c = GetParam();
  Rng rng(42);
  Tensor a = Tensor::parameter(random_matrix(5, 4, rng, c.lo, c.hi));
  Tensor b = Tensor::parameter(random_matrix(c.b_rows, c.b_cols, rng, c.lo, c.hi));
  auto f = [&] {
    Tensor out = c.fn(a, b);
    Rng wr(5);
    // Weighted sum so every output entry contributes a distinct cotangent.
    return sum(mul(out, Tensor::constant(random_matrix(out.rows(), out.cols(), wr))));
  };
  EXPECT_LE(check_gradient(f, a).max_rel_error, 1e-4) << c.name << " wrt a";
  EXPECT_LE(check_gradient(f, b).max_rel_error, 1e-4) << c.name << " wrt b";
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"add", [](auto& a, auto& b) { return add(a, b); }, 5, 4},
        OpCase{"add_row", [](auto& a, auto& b) { return add(a, b); }, 1, 4},
        OpCase{"sub_col", [](auto& a, auto& b) { return sub(a, b); }, 5, 1},
        OpCase{"mul_scalar", [](auto& a, auto& b) { return mul(a, b); }, 1, 1},
        OpCase{"mul", [](auto& a, auto& b) { return mul(a, b); }, 5, 4},
        OpCase{"div", [](auto& a, auto& b) { return div(a, b); }, 5, 4, 0.5, 2.0},
        OpCase{"scale", [](auto& a, auto& b) { return add(scale(a, -2.5), b); }, 5, 4},
        OpCase{"add_scalar", [](auto& a, auto& b) { return mul(add_scalar(a, 3.0), b); }, 5, 4},
        OpCase{"relu", [](auto& a, auto& b) { return mul(relu(a), b); }, 5, 4},
        OpCase{"tanh", [](auto& a, auto& b) { return mul(tanh(a), b); }, 5, 4},
        OpCase{"exp", [](auto& a, auto& b) { return mul(exp(a), b); }, 5, 4},
        OpCase{"log", [](auto& a, auto& b) { return mul(log(a), b); }, 5, 4, 0.2, 3.0},
        OpCase{"square", [](auto& a, auto& b) { return mul(square(a), b); }, 5, 4},
        OpCase{"sqrt", [](auto& a, auto& b) { return mul(sqrt(a), b); }, 5, 4, 0.2, 3.0},
        OpCase{"clamp", [](auto& a, auto& b) { return mul(clamp(a, -5, 5), b); }, 5, 4},
        OpCase{"matmul", [](auto& a, auto& b) { return matmul(a, b); }, 4, 3},
        OpCase{"transpose", [](auto& a, auto& b) { return matmul(transpose(a), b); }, 5, 2},
        OpCase{"sum", [](auto& a, auto& b) { return mul(sum(square(a)), b); }, 1, 1},
        OpCase{"mean", [](auto& a, auto& b) { return mul(mean(a), b); }, 1, 1},
        OpCase{"row_sum", [](auto& a, auto& b) { return mul(row_sum(square(a)), b); }, 5, 1},
        OpCase{"col_sum", [](auto& a, auto& b) { return mul(col_sum(square(a)), b); }, 1, 4},
        OpCase{"col_mean", [](auto& a, auto& b) { return mul(col_mean(square(a)), b); }, 1, 4},
        OpCase{"slice_cols", [](auto& a, auto& b) { return mul(slice_cols(a, 1, 3), b); }, 5, 2},
        OpCase{"concat_cols", [](auto& a, auto& b) { return concat_cols({a, tanh(b), a}); }, 5, 2},
        OpCase{"gather_rows",
               [](auto& a, auto& b) {
                 const std::vector<std::size_t> idx{4, 0, 4, 2};
                 return mul(gather_rows(a, idx), b);
               },
               4, 4},
        OpCase{"softmax_rows", [](auto& a, auto& b) { return mul(softmax_rows(a), b); }, 5, 4},
        OpCase{"logsumexp_rows", [](auto& a, auto& b) { return mul(logsumexp_rows(a), b); }, 5, 1},
        OpCase{"inverse_spd",
               [](auto& a, auto& b) {
                 Tensor spd = add(matmul(transpose(a), a), Tensor::constant(Matrix::identity(4)));
                 return matmul(inverse_spd(spd), b);
               },
               4, 3},
        OpCase{"logdet_spd",
               [](auto& a, auto& b) {
                 Tensor spd = add(matmul(transpose(a), a), Tensor::constant(Matrix::identity(4)));
                 return mul(logdet_spd(spd), b);
               },
               1, 1}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return info.param.name; });

TEST(LinearAlgebra, InverseAndLogdetAgreeWithDirectFormulas) {
  Tensor a = Tensor::constant(Matrix::from_rows({{4, 2}, {2, 3}}));
  const Matrix inv = inverse_spd(a).value();
  EXPECT_NEAR(inv(0, 0), 3.0 / 8.0, 1e-15);
  EXPECT_NEAR(inv(0, 1), -2.0 / 8.0, 1e-15);
  EXPECT_NEAR(inv(1, 1), 4.0 / 8.0, 1e-15);
  EXPECT_NEAR(logdet_spd(a).item(), std::log(8.0), 1e-14);
  EXPECT_THROW(inverse_spd(Tensor::constant(Matrix::from_rows({{1, 2}, {2, 1}}))), NumericalError);
}

TEST(Softmax, RowsOnSimplexAndLogsumexpStable) {
  Tensor a = Tensor::constant(Matrix::from_rows({{1000, 1000}, {std::log(2.0), 0}}));
  Matrix p = softmax_rows(a).value();
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_NEAR(p(1, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(logsumexp_rows(a)(0, 0), 1000 + std::log(2.0), 1e-12);
}

TEST(Dropout, ZeroRateIsIdentityAndMaskIsSeeded) {
  Rng r1(3), r2(3);
  Tensor x = Tensor::constant(Matrix(4, 6, 1.0));
  EXPECT_EQ(dropout(x, 0.0, r1).value(), x.value());
  Matrix a = dropout(x, 0.5, r1).value();
  EXPECT_EQ(dropout(x, 0.5, r2).value(), a);
  for (double v : a.data) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Matrix p = Matrix::from_rows({{1.5, -2.0}});
  const Matrix before = p;
  AdamState st;
  std::vector<Matrix*> ps{&p};
  std::vector<Matrix> gs{Matrix(1, 2)};
  for (int i = 0; i < 3; ++i) adam_step(ps, gs, st, AdamConfig{0.1});
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  Matrix p = Matrix::from_rows({{2.0}});
  AdamState st;
  std::vector<Matrix*> ps{&p};
  std::vector<Matrix> gs{Matrix::from_rows({{1.0}})};
  adam_step(ps, gs, st, AdamConfig{0.1});
  EXPECT_NEAR(p(0, 0), 2.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, IdenticalStateGivesIdenticalUpdate) {
  auto once = [] {
    Matrix p = Matrix::from_rows({{0.3, -0.7}, {1.1, 0.0}});
    AdamState st;
    std::vector<Matrix*> ps{&p};
    std::vector<Matrix> gs{Matrix::from_rows({{0.2, -0.1}, {0.05, 3.0}})};
    adam_step(ps, gs, st, AdamConfig{});
    adam_step(ps, gs, st, AdamConfig{});
    return p;
  };
  EXPECT_EQ(once(), once());
}

TEST(Glorot, WithinBoundsAndSeeded) {
  Rng a(9), b(9);
  Matrix w = glorot_uniform(10, 6, a);
  EXPECT_EQ(w, glorot_uniform(10, 6, b));
  const double limit = std::sqrt(6.0 / 16.0);
  for (double v : w.data) EXPECT_LE(std::abs(v), limit);
}

}  // namespace
}  // namespace specae
