#include <gtest/gtest.h>

#include <girnet/conv.hpp>
#include <girnet/rng.hpp>

#include "support/oracles.hpp"

using namespace girnet;

namespace {

Tensor<double> var_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* b,
                        int stride, int pad) {
  Tape<double> tape;
  auto xv = tape.constant(x), wv = tape.constant(w);
  if (b) return conv2d(xv, wv, tape.constant(*b), stride, pad).value();
  return conv2d(xv, wv, stride, pad).value();
}

}  // namespace

TEST(Conv2d, OrientationIsCrossCorrelation) {
  // x = [1,2,3], w = [1,10,100], pad 1: output taps read left-to-right.
  Tensor<double> x({1, 1, 1, 3}, {1, 2, 3});
  Tensor<double> w({1, 1, 1, 3}, {1, 10, 100});
  auto y = var_conv(x, w, nullptr, 1, 0);  // valid: single column
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 1 + 20 + 300);
  Tensor<double> xp({1, 1, 1, 3}, {1, 2, 3});
  // pad 1 applies to both axes: the single row widens to three, and the
  // rows that read only padding come out zero.
  Tape<double> tape;
  auto yp = conv2d(tape.constant(xp), tape.constant(w), 1, 1).value();
  ASSERT_EQ(yp.shape(), (Shape{1, 1, 3, 3}));
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(yp[j], 0.0);
    EXPECT_DOUBLE_EQ(yp[6 + j], 0.0);
  }
  EXPECT_DOUBLE_EQ(yp[3], 10 * 1 + 100 * 2);
  EXPECT_DOUBLE_EQ(yp[4], 1 * 1 + 10 * 2 + 100 * 3);
  EXPECT_DOUBLE_EQ(yp[5], 1 * 2 + 10 * 3);
}

TEST(Conv2d, BiasAddsPerOutputChannel) {
  Tensor<double> x({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor<double> w({2, 1, 1, 1}, {2, -3});
  Tensor<double> b({2}, {0.25, 0.5});
  auto y = var_conv(x, w, &b, 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 2, 2}));
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(y[i], 2.25);
    EXPECT_DOUBLE_EQ(y[4 + i], -2.5);
  }
}

TEST(Conv2d, ZeroInputYieldsBias) {
  Tensor<double> x = Tensor<double>::zeros({2, 3, 4, 4});
  Tensor<double> w = Tensor<double>::full({5, 3, 3, 3}, 0.7);
  Tensor<double> b({5}, {1, 2, 3, 4, 5});
  auto y = var_conv(x, w, &b, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 4, 4}));
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 5; ++o)
      for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(y[(n * 5 + o) * 16 + i], b[o]);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(101);
  struct Case {
    Shape x, w;
    int stride, pad;
  };
  const Case cases[] = {
      {{2, 3, 6, 5}, {4, 3, 3, 3}, 1, 1}, {{1, 2, 7, 7}, {3, 2, 3, 3}, 2, 0},
      {{2, 4, 5, 5}, {6, 4, 1, 1}, 1, 0}, {{1, 1, 9, 5}, {2, 1, 5, 5}, 2, 2},
      {{3, 2, 4, 6}, {2, 2, 2, 2}, 1, 0},
  };
  for (const auto& c : cases) {
    auto x = random_uniform<double>(c.x, rng, -1.0, 1.0);
    auto w = random_uniform<double>(c.w, rng, -1.0, 1.0);
    auto b = random_uniform<double>({c.w[0]}, rng, -1.0, 1.0);
    auto got = var_conv(x, w, &b, c.stride, c.pad);
    auto want = oracle::conv2d(x, w, &b, c.stride, c.pad);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.numel(); ++i) EXPECT_NEAR(got[i], want[i], 1e-5);
  }
}

TEST(Conv2d, PointwiseFastPathMatchesOracle) {
  Rng rng(7);
  auto x = random_uniform<float>({2, 8, 6, 6}, rng, -1.f, 1.f);
  auto w = random_uniform<float>({4, 8, 1, 1}, rng, -1.f, 1.f);
  auto b = random_uniform<float>({4}, rng, -1.f, 1.f);
  Tape<float> tape;
  auto y = conv2d(tape.constant(x), tape.constant(w), tape.constant(b), 1, 0).value();
  auto xd = x.cast<double>();
  auto wd = w.cast<double>();
  auto bd = b.cast<double>();
  auto want = oracle::conv2d(xd, wd, &bd, 1, 0);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR((double)y[i], want[i], 1e-5);
}

TEST(Conv2d, IdentityPointwiseKernel) {
  Rng rng(5);
  auto x = random_uniform<double>({1, 3, 4, 4}, rng, 0.0, 1.0);
  Tensor<double> w = Tensor<double>::zeros({3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0;
  auto y = var_conv(x, w, nullptr, 1, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Conv2d, StrideAndPaddingShapes) {
  Tensor<float> x = Tensor<float>::ones({1, 1, 5, 5});
  Tensor<float> w = Tensor<float>::ones({1, 1, 3, 3});
  Tape<float> tape;
  EXPECT_EQ(conv2d(tape.constant(x), tape.constant(w), 2, 1).shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(conv2d(tape.constant(x), tape.constant(w), 1, 0).shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(conv2d(tape.constant(x), tape.constant(w), 1, 2).shape(), (Shape{1, 1, 7, 7}));
}

TEST(Conv2d, RejectsBadArguments) {
  Tape<float> tape;
  auto x = tape.constant(Tensor<float>::ones({1, 2, 4, 4}));
  auto w_chan = tape.constant(Tensor<float>::ones({1, 3, 3, 3}));  // channel mismatch
  EXPECT_THROW(conv2d(x, w_chan, 1, 1), std::invalid_argument);
  auto w = tape.constant(Tensor<float>::ones({1, 2, 3, 3}));
  EXPECT_THROW(conv2d(x, w, 0, 1), std::invalid_argument);   // stride < 1
  EXPECT_THROW(conv2d(x, w, 1, -1), std::invalid_argument);  // negative padding
  auto w_big = tape.constant(Tensor<float>::ones({1, 2, 9, 9}));
  EXPECT_THROW(conv2d(x, w_big, 1, 0), std::invalid_argument);  // kernel larger than padded input
}

TEST(Conv2d, InputGradientCountsKernelCoverage) {
  // All-ones 3x3 kernel, pad 1: each input pixel's gradient equals the number
  // of output positions whose window covers it (9 interior, 6 edge, 4 corner).
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::ones({1, 1, 5, 5}));
  auto w = tape.constant(Tensor<double>::ones({1, 1, 3, 3}));
  tape.backward(sum(conv2d(x, w, 1, 1)));
  auto g = tape.grad(x);
  auto at = [&](int i, int j) { return g[i * 5 + j]; };
  EXPECT_DOUBLE_EQ(at(2, 2), 9.0);
  EXPECT_DOUBLE_EQ(at(0, 2), 6.0);
  EXPECT_DOUBLE_EQ(at(2, 0), 6.0);
  EXPECT_DOUBLE_EQ(at(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(at(4, 4), 4.0);
}

TEST(Conv2d, WeightGradientSumsInputWindows) {
  Tape<double> tape;
  Tensor<double> xv({1, 1, 2, 2}, {1, 2, 3, 4});
  auto x = tape.constant(xv);
  auto w = tape.leaf(Tensor<double>::zeros({1, 1, 2, 2}));
  auto b = tape.leaf(Tensor<double>::zeros({1}));
  tape.backward(sum(conv2d(x, w, b, 1, 0)));
  auto gw = tape.grad(w);
  // single valid position: gradient is the input window itself
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(gw[i], xv[i]);
  EXPECT_DOUBLE_EQ(tape.grad(b)[0], 1.0);
}
