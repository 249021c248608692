#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "saarn/errors.hpp"
#include "saarn/tensor/ops.hpp"
#include "support.hpp"

namespace saarn {
namespace {

using testing::grad_check;
using testing::project;
using testing::random_param;

constexpr double kTol = 1e-3;

TEST(Ops, ElementwiseGradients) {
  Rng rng(1);
  auto a = random_param(rng, {2, 3});
  auto b = random_param(rng, {2, 3});
  auto r = grad_check(
      [&] {
        auto y = ops::add(ops::mul(ops::gelu(a), ops::tanh(b)), ops::sub(ops::sigmoid(a), ops::scale(b, 0.3)));
        return project(y);
      },
      {{"a", a}, {"b", b}});
  EXPECT_LT(r.max_rel, kTol) << r.worst;
}

TEST(Ops, LinearGradientIsTight) {
  Rng rng(2);
  auto x = random_param(rng, {2, 3, 4});
  auto w = random_param(rng, {4, 5});
  auto b = random_param(rng, {5});
  auto r = grad_check([&] { return project(ops::linear(x, w, b)); }, {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Ops, LinearMatchesDenseReference) {
  Rng rng(3);
  auto x = random_param(rng, {2, 3});
  auto w = random_param(rng, {3, 4});
  auto b = random_param(rng, {4});
  auto y = ops::linear(x, w, b);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double ref = b.value()[j];
      for (std::size_t k = 0; k < 3; ++k) ref += x.value()[i * 3 + k] * w.value()[k * 4 + j];
      EXPECT_NEAR(y.value()[i * 4 + j], ref, 1e-12);
    }
}

TEST(Ops, Conv2dGradients) {
  Rng rng(4);
  auto x = random_param(rng, {1, 4, 4, 2});
  auto w = random_param(rng, {3 * 3 * 2, 3});
  auto b = random_param(rng, {3});
  auto r = grad_check([&] { return project(ops::conv2d(x, w, b, {3, 1, 1})); },
                      {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_LT(r.max_rel, 1e-5) << r.worst;
  auto w2 = random_param(rng, {2 * 2 * 2, 3});
  auto r2 = grad_check([&] { return project(ops::conv2d(x, w2, b, {2, 2, 0})); },
                       {{"x", x}, {"w", w2}, {"b", b}});
  EXPECT_LT(r2.max_rel, 1e-5) << r2.worst;
}

TEST(Ops, Conv2dMatchesDirectLoop) {
  Rng rng(5);
  auto x = random_param(rng, {1, 3, 3, 2});
  auto w = random_param(rng, {3 * 3 * 2, 1});
  auto y = ops::conv2d(x, w, Var<double>{}, {3, 1, 1});
  for (int oy = 0; oy < 3; ++oy)
    for (int ox = 0; ox < 3; ++ox) {
      double ref = 0;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
          for (int c = 0; c < 2; ++c) {
            const int iy = oy + ky - 1, ix = ox + kx - 1;
            if (iy < 0 || ix < 0 || iy >= 3 || ix >= 3) continue;
            ref += x.value()[(iy * 3 + ix) * 2 + c] * w.value()[(ky * 3 + kx) * 2 + c];
          }
      EXPECT_NEAR(y.value()[oy * 3 + ox], ref, 1e-12);
    }
}

TEST(Ops, LayerNormAndPoolingGradients) {
  Rng rng(6);
  auto x = random_param(rng, {1, 4, 4, 3});
  auto g = random_param(rng, {3});
  auto b = random_param(rng, {3});
  auto r = grad_check(
      [&] {
        auto y = ops::layer_norm(x, g, b);
        return project(ops::upsample_nearest(ops::avg_pool(y, 2), 2));
      },
      {{"x", x}, {"g", g}, {"b", b}});
  EXPECT_LT(r.max_rel, kTol) << r.worst;
}

TEST(Ops, AvgPoolIsWindowMean) {
  Rng rng(7);
  auto x = random_param(rng, {1, 4, 4, 1});
  auto y = ops::avg_pool(x, 2);
  for (int oy = 0; oy < 2; ++oy)
    for (int ox = 0; ox < 2; ++ox) {
      double s = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) s += x.value()[(2 * oy + dy) * 4 + 2 * ox + dx];
      EXPECT_NEAR(y.value()[oy * 2 + ox], s / 4, 1e-12);
    }
}

TEST(Ops, EmbeddingMaskedMeanAndConcatGradients) {
  Rng rng(8);
  auto table = random_param(rng, {5, 3});
  auto pos = random_param(rng, {4, 3});
  const std::vector<std::size_t> ids{1, 4, 2, 0, 3, 3};
  const ops::ByteMask mask{1, 1, 0, 1, 1, 1};
  auto r = grad_check(
      [&] {
        auto e = ops::add_positional(ops::embedding(table, ids, 2, 3), pos);
        auto m = ops::masked_mean(e, mask);
        return project(ops::concat_last<double>({m, ops::mean_positions(e)}));
      },
      {{"table", table}, {"pos", pos}});
  EXPECT_LT(r.max_rel, kTol) << r.worst;
}

TEST(Ops, MaskedMeanOfSingleToken) {
  auto t = Var<double>::constant({1, 1, 3}, {1.0, -2.0, 0.5});
  auto m = ops::masked_mean(t, {1});
  EXPECT_EQ(std::vector<double>(m.value().begin(), m.value().end()),
            (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_THROW(ops::masked_mean(t, {0}), InvalidInputError);
}

TEST(Attention, GradientsWithHeadsAndMask) {
  Rng rng(9);
  auto q = random_param(rng, {2, 3, 4});
  auto k = random_param(rng, {2, 5, 4});
  auto v = random_param(rng, {2, 5, 4});
  const ops::ByteMask mask{1, 1, 0, 1, 0, 1, 0, 0, 0, 1};
  auto r = grad_check([&] { return project(ops::attention(q, k, v, mask, 2, 0.5)); },
                      {{"q", q}, {"k", k}, {"v", v}});
  EXPECT_LT(r.max_rel, kTol) << r.worst;
}

TEST(Attention, ScalarHandCase) {
  // q = [2], keys [1, 3], scale 1: softmax([2, 6]).
  auto q = Var<double>::constant({1, 1, 1}, {2.0});
  auto k = Var<double>::constant({1, 2, 1}, {1.0, 3.0});
  auto v = Var<double>::constant({1, 2, 1}, {10.0, 20.0});
  std::vector<double> w;
  auto y = ops::attention(q, k, v, {}, 1, 1.0, &w);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_NEAR(w[0], 0.01799, 1e-4);
  EXPECT_NEAR(w[1], 0.98201, 1e-4);
  EXPECT_NEAR(y.item(), 10 * w[0] + 20 * w[1], 1e-12);
}

TEST(Attention, SingleTokenAndIdenticalKeys) {
  Rng rng(10);
  auto q = random_param(rng, {1, 4, 2});
  auto k1 = random_param(rng, {1, 1, 2});
  auto v1 = random_param(rng, {1, 1, 2});
  std::vector<double> w;
  auto y = ops::attention(q, k1, v1, {}, 1, 0.7, &w);
  for (double x : w) EXPECT_EQ(x, 1.0);
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t e = 0; e < 2; ++e) EXPECT_DOUBLE_EQ(y.value()[p * 2 + e], v1.value()[e]);

  auto k2 = Var<double>::constant({1, 2, 2}, {0.3, -1.0, 0.3, -1.0});
  auto v2 = random_param(rng, {1, 2, 2});
  ops::attention(q, k2, v2, {}, 1, 0.7, &w);
  for (double x : w) EXPECT_DOUBLE_EQ(x, 0.5);
}

TEST(Attention, AllMaskedIsRejected) {
  auto q = Var<double>::constant({1, 1, 2}, 1.0);
  auto k = Var<double>::constant({1, 2, 2}, 1.0);
  EXPECT_THROW(ops::attention(q, k, k, {0, 0}, 1, 1.0), InvalidInputError);
}

TEST(Softmax, DisabledColumnsAreExactZeros) {
  auto logits = Var<double>::constant({1, 3}, {std::log(2.0), 0.0, 0.0});
  auto w = ops::softmax_rows(logits);
  EXPECT_NEAR(w.value()[0], 0.5, 1e-6);
  EXPECT_NEAR(w.value()[1], 0.25, 1e-6);
  EXPECT_NEAR(w.value()[2], 0.25, 1e-6);
  auto w2 = ops::softmax_rows(logits, {true, false, true});
  EXPECT_EQ(w2.value()[1], 0.0);
  EXPECT_NEAR(w2.value()[0] + w2.value()[2], 1.0, 1e-12);
  EXPECT_THROW(ops::softmax_rows(logits, {false, false, false}), InvalidInputError);
}

TEST(Softmax, Gradients) {
  Rng rng(11);
  auto x = random_param(rng, {3, 3});
  auto s = random_param(rng, {3, 2, 2});
  auto r = grad_check(
      [&] { return project(ops::scale_per_sample(s, ops::softmax_rows(x, {true, false, true}), 2)); },
      {{"x", x}, {"s", s}});
  EXPECT_LT(r.max_rel, kTol) << r.worst;
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  auto x = Var<double>::parameter({1}, {3.0});
  auto y = ops::mul(x, x);  // d/dx = 2x
  auto z = ops::add(y, x);  // + 1
  backward(z);
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autograd, ConstantsRecordNoGraph) {
  auto a = Var<double>::constant({2}, 1.0);
  auto b = ops::gelu(a);
  EXPECT_FALSE(b.requires_grad());
}

TEST(Ops, ShapeMismatchThrows) {
  auto a = Var<double>::constant({2, 3}, 1.0);
  auto b = Var<double>::constant({3, 2}, 1.0);
  EXPECT_THROW(ops::add(a, b), ShapeError);
  EXPECT_THROW(ops::linear(a, Var<double>::constant({2, 2}, 1.0)), ShapeError);
}

}  // namespace
}  // namespace saarn
