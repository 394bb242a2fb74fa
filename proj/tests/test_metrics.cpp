#include <gtest/gtest.h>

#include <limits>

#include <girnet/metrics.hpp>
#include <girnet/rng.hpp>

#include "support/oracles.hpp"

using namespace girnet;

TEST(Charbonnier, IdenticalInputsGiveEpsilon) {
  auto a = Tensor<double>::full({3, 4, 4}, 0.3);
  std::vector<Tensor<double>> pa{a}, pb{a};
  EXPECT_DOUBLE_EQ(charbonnier_value<double>(pa, pb), 1e-3);
}

TEST(Charbonnier, UniformDifferenceClosedForm) {
  auto a = Tensor<double>::zeros({2, 5, 5});
  auto b = Tensor<double>::full({2, 5, 5}, 0.003);
  std::vector<Tensor<double>> pa{a}, pb{b};
  EXPECT_NEAR(charbonnier_value<double>(pa, pb), 3.16227766e-3, 1e-11);
  auto c = Tensor<double>::ones({2, 5, 5});
  std::vector<Tensor<double>> pc{c};
  EXPECT_NEAR(charbonnier_value<double>(pc, pa), std::sqrt(1.0 + 1e-6), 1e-12);
}

TEST(Charbonnier, MeanAcrossFramesAndPixels) {
  auto z = Tensor<double>::zeros({1, 2, 2});
  auto d1 = Tensor<double>::full({1, 2, 2}, 1.0);
  std::vector<Tensor<double>> pred{z, z}, gt{d1, z};
  // half the elements differ by 1, half are identical
  const double want = 0.5 * std::sqrt(1.0 + 1e-6) + 0.5 * 1e-3;
  EXPECT_NEAR(charbonnier_value<double>(pred, gt), want, 1e-12);
}

TEST(Charbonnier, LossNodeMatchesValueAndGradientSign) {
  Tape<double> tape;
  auto pv = Tensor<double>::full({1, 3, 3}, 0.8);
  auto gv = Tensor<double>::full({1, 3, 3}, 0.5);
  auto p = tape.leaf(pv);
  auto loss = charbonnier_loss(p, gv);
  std::vector<Tensor<double>> a{pv}, b{gv};
  EXPECT_NEAR(loss.value()[0], charbonnier_value<double>(a, b), 1e-15);
  tape.backward(loss);
  auto g = tape.grad(p);
  for (std::size_t i = 0; i < g.numel(); ++i) EXPECT_GT(g[i], 0.0);  // pred above target
}

TEST(Charbonnier, NeverBelowEpsilonFloor) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_uniform<double>({3, 6, 6}, rng, 0.0, 1.0);
    auto b = random_uniform<double>({3, 6, 6}, rng, 0.0, 1.0);
    std::vector<Tensor<double>> pa{a}, pb{b};
    EXPECT_GT(charbonnier_value<double>(pa, pb), 1e-3);
  }
}

TEST(Charbonnier, RejectsCountMismatch) {
  auto a = Tensor<double>::zeros({1, 2, 2});
  std::vector<Tensor<double>> one{a}, two{a, a};
  EXPECT_THROW(charbonnier_value<double>(one, two), std::invalid_argument);
  std::vector<Tensor<double>> none;
  EXPECT_THROW(charbonnier_value<double>(none, none), std::invalid_argument);
}

TEST(Psnr, UniformTenthDifferenceIsTwentyDb) {
  auto a = Tensor<double>::zeros({3, 8, 8});
  auto b = Tensor<double>::full({3, 8, 8}, 0.1);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-6);
}

TEST(Psnr, IdenticalImagesCapAt99) {
  auto a = Tensor<double>::full({3, 8, 8}, 0.7);
  EXPECT_DOUBLE_EQ(psnr(a, a), 99.0);
  // tiny but nonzero error stays below the cap
  auto b = a;
  b[0] += 1e-9;
  EXPECT_LT(psnr(a, b), 99.0 + 1e-12);
}

TEST(Psnr, HalfAmplitudeDifferenceIsSixDb) {
  auto a = Tensor<double>::zeros({1, 4, 4});
  auto b = Tensor<double>::full({1, 4, 4}, 0.5);
  EXPECT_NEAR(psnr(a, b), 6.0206, 1e-4);
  auto c = Tensor<double>::full({1, 4, 4}, 0.1);
  EXPECT_NEAR(psnr(a, c) - psnr(a, b), 2.0 * 10.0 * std::log10(5.0), 1e-9);
}

TEST(Psnr, StrictlyDecreasesWithNoiseAmplitude) {
  Rng rng(4);
  auto img = random_uniform<double>({3, 12, 12}, rng, 0.2, 0.8);
  auto noise = random_uniform<double>({3, 12, 12}, rng, -1.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp = 0.01; amp <= 0.3 + 1e-12; amp += 0.01) {
    Tensor<double> noisy = img;
    for (std::size_t i = 0; i < noisy.numel(); ++i) noisy[i] += amp * noise[i];
    const double p = psnr(img, noisy);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, IdenticalImagesAreUnity) {
  Rng rng(2);
  auto a = random_uniform<double>({3, 16, 16}, rng, 0.0, 1.0);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, MatchesDirectSlidingWindowOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    auto a = random_uniform<double>({3, 14, 18}, rng, 0.0, 1.0);
    auto b = random_uniform<double>({3, 14, 18}, rng, 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-6);
  }
}

TEST(Ssim, ConstantShiftOnMidGrayMatchesOracle) {
  auto target = Tensor<double>::full({3, 16, 16}, 0.5);
  Tensor<double> pred = target;
  for (std::size_t i = 0; i < pred.numel(); ++i) pred[i] += 0.1;
  EXPECT_NEAR(ssim(pred, target), oracle::ssim(pred, target), 1e-6);
  EXPECT_LT(ssim(pred, target), 1.0);
}

TEST(Ssim, SymmetricInArguments) {
  Rng rng(13);
  auto a = random_uniform<double>({1, 12, 12}, rng, 0.0, 1.0);
  auto b = random_uniform<double>({1, 12, 12}, rng, 0.0, 1.0);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, InvertedImageScoresLow) {
  Rng rng(14);
  auto a = random_uniform<double>({1, 16, 16}, rng, 0.0, 1.0);
  Tensor<double> inv = a;
  for (std::size_t i = 0; i < inv.numel(); ++i) inv[i] = 1.0 - inv[i];
  EXPECT_LT(ssim(a, inv), 0.5);
}

TEST(Ssim, RejectsSmallImages) {
  auto a = Tensor<double>::zeros({1, 8, 8});
  EXPECT_THROW(ssim(a, a), std::invalid_argument);
}

TEST(Luma, Bt601Coefficients) {
  Tensor<double> rgb = Tensor<double>::zeros({3, 1, 1});
  rgb[0] = 1.0;
  EXPECT_NEAR(luma(rgb)[0], 0.299, 1e-12);
  rgb[0] = 0.0;
  rgb[1] = 1.0;
  EXPECT_NEAR(luma(rgb)[0], 0.587, 1e-12);
  rgb[1] = 0.0;
  rgb[2] = 1.0;
  EXPECT_NEAR(luma(rgb)[0], 0.114, 1e-12);
  EXPECT_THROW(luma(Tensor<double>::zeros({1, 2, 2})), std::invalid_argument);
}

TEST(EvaluateClip, PerFrameRowsAndMeans) {
  VideoClip<double> pred, gt;
  for (double v : {0.0, 0.0}) {
    pred.frames.push_back(Tensor<double>::full({3, 16, 16}, v));
    gt.frames.push_back(Tensor<double>::full({3, 16, 16}, v));
  }
  pred.frames[1] = Tensor<double>::full({3, 16, 16}, 0.1);
  auto r = evaluate_clip(pred, gt);
  ASSERT_EQ(r.psnr_db.size(), 2u);
  ASSERT_EQ(r.ssim_val.size(), 2u);
  EXPECT_DOUBLE_EQ(r.psnr_db[0], 99.0);
  EXPECT_NEAR(r.psnr_db[1], 20.0, 1e-6);
  EXPECT_NEAR(r.mean_psnr, (99.0 + r.psnr_db[1]) / 2, 1e-9);
  EXPECT_NEAR(r.mean_ssim, (r.ssim_val[0] + r.ssim_val[1]) / 2, 1e-12);
  EXPECT_GT(r.charbonnier, 0.0);
}

TEST(EvaluateClip, PerfectPredictionSaturates) {
  Rng rng(6);
  VideoClip<double> clip;
  for (int i = 0; i < 3; ++i)
    clip.frames.push_back(random_uniform<double>({3, 16, 16}, rng, 0.0, 1.0));
  auto r = evaluate_clip(clip, clip);
  EXPECT_DOUBLE_EQ(r.mean_psnr, 99.0);
  EXPECT_NEAR(r.mean_ssim, 1.0, 1e-12);
}

TEST(EvaluateClip, LumaOnlyDiffersFromRgb) {
  Rng rng(7);
  VideoClip<double> pred, gt;
  pred.frames.push_back(random_uniform<double>({3, 16, 16}, rng, 0.0, 1.0));
  gt.frames.push_back(random_uniform<double>({3, 16, 16}, rng, 0.0, 1.0));
  auto rgb = evaluate_clip(pred, gt, false);
  auto y = evaluate_clip(pred, gt, true);
  EXPECT_NE(rgb.mean_psnr, y.mean_psnr);
}

TEST(EvaluateClip, RejectsFrameCountMismatch) {
  VideoClip<double> a, b;
  a.frames.push_back(Tensor<double>::zeros({3, 16, 16}));
  b.frames.push_back(Tensor<double>::zeros({3, 16, 16}));
  b.frames.push_back(Tensor<double>::zeros({3, 16, 16}));
  EXPECT_THROW(evaluate_clip(a, b), std::invalid_argument);
}
