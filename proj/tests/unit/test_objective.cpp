#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "oracles.hpp"
#include "pstnet/error.hpp"
#include "pstnet/objective.hpp"

namespace pstnet {
namespace {

constexpr double kEps = kCharbonnierEps;

torch::Tensor f64(std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kFloat64); }

TEST(CharbonnierTest, ZeroDifferenceIsEpsilon) {
  const auto x = torch::rand({3, 5, 5}, torch::kFloat64);
  EXPECT_DOUBLE_EQ(charbonnier(x, x).item<double>(), 1e-3);
}

TEST(CharbonnierTest, ConstantDifferenceAndSymmetry) {
  const auto a = torch::full({4, 4}, 0.75, torch::kFloat64);
  const auto b = torch::full({4, 4}, 0.25, torch::kFloat64);
  EXPECT_NEAR(charbonnier(a, b).item<double>(), std::sqrt(0.25 + 1e-6), 1e-15);
  torch::manual_seed(0);
  const auto p = torch::randn({20}, torch::kFloat64);
  const auto q = torch::randn({20}, torch::kFloat64);
  EXPECT_EQ(charbonnier(p, q).item<double>(), charbonnier(q, p).item<double>());
}

TEST(CharbonnierTest, BoundedBelowAndApproachesL1) {
  torch::manual_seed(1);
  for (int i = 0; i < 20; ++i) {
    const auto a = torch::randn({10}, torch::kFloat64);
    const auto b = torch::randn({10}, torch::kFloat64);
    EXPECT_GT(charbonnier(a, b).item<double>(), kEps);
  }
  const auto a = torch::randn({100}, torch::kFloat64) * 100.0;
  const auto b = torch::zeros({100}, torch::kFloat64);
  EXPECT_NEAR(charbonnier(a, b).item<double>(), a.abs().mean().item<double>(), 1e-4);
}

TEST(LossRegTest, ReferenceValues) {
  const auto gt = ExposureParams::identity(2);
  EXPECT_NEAR(loss_reg(gt, gt), 8e-3, 1e-15);
  auto patches = gt.patches();
  patches[2].w = {2.0, 2.0, 2.0};
  EXPECT_NEAR(loss_reg(ExposureParams(2, patches), gt), 8e-3 - kEps + std::sqrt(1.0 + 1e-6), 1e-6);
  EXPECT_THROW(loss_reg(ExposureParams::identity(1), gt), ShapeError);
}

TEST(LossRegTest, MonotoneInWeightError) {
  const auto gt = ExposureParams::identity(2);
  double previous = loss_reg(gt, gt);
  for (double off : {0.01, 0.1, 0.5, 1.0, 3.0}) {
    auto patches = gt.patches();
    patches[1].w[0] = 1.0 + off;
    const double now = loss_reg(ExposureParams(2, patches), gt);
    EXPECT_GT(now, previous);
    previous = now;
  }
}

TEST(LossRegTest, TensorFormAveragesBatch) {
  torch::manual_seed(2);
  const auto w = torch::rand({2, 4, 3}, torch::kFloat64) + 1.0;
  const auto b = torch::rand({2, 4, 3}, torch::kFloat64);
  const auto wg = torch::rand({2, 4, 3}, torch::kFloat64) + 1.0;
  const auto bg = torch::rand({2, 4, 3}, torch::kFloat64);
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int n = 0; n < 4; ++n) {
      expected += charbonnier(w[i][n], wg[i][n]).item<double>() + charbonnier(b[i][n], bg[i][n]).item<double>();
    }
  }
  EXPECT_NEAR(loss_reg(w, b, wg, bg).item<double>(), expected / 2.0, 1e-12);
}

TEST(LossSegTest, ReferenceValues) {
  const auto gt = (torch::rand({1, 1, 8, 8}) > 0.5).to(torch::kFloat64);
  EXPECT_NEAR(loss_seg(torch::full({1, 1, 8, 8}, 0.5, torch::kFloat64), gt).item<double>(), std::log(2.0), 1e-12);
  EXPECT_LE(loss_seg(gt, gt).item<double>(), 1e-5);
  EXPECT_TRUE(std::isfinite(loss_seg(1.0 - gt, gt).item<double>()));
}

TEST(LossSegTest, FlippingAGroundTruthPixelIncreasesLoss) {
  torch::manual_seed(3);
  const auto gt = (torch::rand({1, 1, 8, 8}) > 0.5).to(torch::kFloat64);
  const auto pred = gt * 0.9 + 0.05;
  auto flipped = gt.clone();
  flipped[0][0][3][3] = 1.0 - flipped[0][0][3][3];
  EXPECT_GT(loss_seg(pred, flipped).item<double>(), loss_seg(pred, gt).item<double>());
}

TEST(LossResTest, ReferenceValuesAndSmoothness) {
  torch::manual_seed(4);
  const auto gt = torch::rand({1, 3, 8, 8}, torch::kFloat64);
  const auto gt_small = torch::rand({1, 3, 4, 4}, torch::kFloat64);
  EXPECT_NEAR(loss_res(gt_small, gt, gt_small, gt).item<double>(), 2.0 * kEps, 1e-15);
  EXPECT_GT(loss_res(gt_small + 0.1, gt, gt_small, gt).item<double>(), 2.0 * kEps);
  EXPECT_NEAR(loss_res(torch::Tensor(), gt, gt_small, gt).item<double>(), kEps, 1e-15);

  auto r = gt.clone().requires_grad_();
  loss_res(gt_small, r, gt_small, gt).backward();
  EXPECT_TRUE(torch::isfinite(r.grad()).all().item<bool>());
  EXPECT_EQ(r.grad().abs().max().item<double>(), 0.0);
}

TEST(TotalLossTest, WeightedSum) {
  const auto reg = f64({0.1}).squeeze();
  const auto seg = f64({0.2}).squeeze();
  const auto res = f64({0.3}).squeeze();
  EXPECT_NEAR(total_loss(reg, seg, res, {1, 1, 1}).item<double>(), 0.6, 1e-15);
  EXPECT_EQ(total_loss(reg, seg, res, {0, 0, 0}).item<double>(), 0.0);
  EXPECT_NEAR(total_loss(reg * 2.0, seg, res, {1, 1, 1}).item<double>() - 0.6, 0.1, 1e-15);
  EXPECT_NEAR(total_loss(torch::Tensor(), seg, res, {1, 1, 1}).item<double>(), 0.5, 1e-15);
  LossWeights bad{1.0, -1.0, 1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TotalLossTest, GradientIsWeightedSumOfComponentGradients) {
  torch::manual_seed(5);
  auto p = torch::randn({2, 4, 3}, torch::kFloat64).requires_grad_();
  const auto target = torch::randn({2, 4, 3}, torch::kFloat64);
  const auto mask = (torch::rand({2, 4, 3}) > 0.5).to(torch::kFloat64);
  auto reg = [&] { return loss_reg(p, p * 0.5, target, target); };
  auto seg = [&] { return loss_seg(torch::sigmoid(p), mask); };
  auto res = [&] { return loss_res(p * 2.0, p, target, target); };
  const LossWeights w{0.3, 1.7, 0.9};
  auto grad_of = [&](const torch::Tensor& loss) { return torch::autograd::grad({loss}, {p})[0]; };
  const auto combined = grad_of(total_loss(reg(), seg(), res(), w));
  const auto parts = grad_of(reg()) * w.alpha + grad_of(seg()) * w.beta + grad_of(res()) * w.gamma;
  EXPECT_LE((combined - parts).abs().max().item<double>(), 1e-12);

  torch::NoGradGuard g;
  auto flat = p.view(-1);
  const double orig = flat[5].item<double>();
  flat[5].fill_(orig + 1e-6);
  const double fp = total_loss(reg(), seg(), res(), w).item<double>();
  flat[5].fill_(orig - 1e-6);
  const double fm = total_loss(reg(), seg(), res(), w).item<double>();
  flat[5].fill_(orig);
  EXPECT_NEAR((fp - fm) / 2e-6, combined.view(-1)[5].item<double>(), 1e-6);
}

TEST(DownsampleMaskTest, RebinarisesAtHalf) {
  auto m = torch::zeros({1, 1, 4, 4});
  m[0][0][0][0] = 1.0;
  m[0][0][0][1] = 1.0;
  m[0][0][2][2] = 1.0;
  const auto d = downsample_mask(m, 2);
  EXPECT_EQ(d[0][0][0][0].item<float>(), 1.0f);
  EXPECT_EQ(d[0][0][1][1].item<float>(), 0.0f);
  EXPECT_EQ(d.sum().item<float>(), 1.0f);
}

TEST(LabTest, ReferenceColours) {
  const auto white = rgb_to_lab(torch::ones({3, 2, 2}));
  EXPECT_NEAR(white[0][0][0].item<double>(), 100.0, 0.1);
  EXPECT_NEAR(white[1][0][0].item<double>(), 0.0, 0.1);
  EXPECT_NEAR(white[2][0][0].item<double>(), 0.0, 0.1);
  const auto black = rgb_to_lab(torch::zeros({3, 2, 2}));
  EXPECT_NEAR(black.abs().max().item<double>(), 0.0, 0.1);
  for (double level : {0.05, 0.2, 0.5, 0.8, 0.95}) {
    const auto gray = rgb_to_lab(torch::full({3, 1, 1}, level));
    EXPECT_NEAR(gray[1][0][0].item<double>(), 0.0, 0.1) << level;
    EXPECT_NEAR(gray[2][0][0].item<double>(), 0.0, 0.1) << level;
  }
}

TEST(LabTest, MatchesScalarConversion) {
  torch::manual_seed(6);
  const auto rgb = torch::rand({2, 3, 5, 7}, torch::kFloat64);
  const auto lab = rgb_to_lab(rgb);
  ASSERT_EQ(lab.sizes(), rgb.sizes());
  const auto a = rgb.accessor<double, 4>();
  const auto l = lab.accessor<double, 4>();
  for (int i = 0; i < 2; ++i) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 7; ++x) {
        const auto ref = testing::srgb_to_lab_scalar(a[i][0][y][x], a[i][1][y][x], a[i][2][y][x]);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(l[i][c][y][x], ref[c], 1e-9);
      }
    }
  }
}

Mask half_mask(int h, int w) {
  auto m = torch::zeros({1, h, w});
  m.index_put_({0, torch::indexing::Slice(), torch::indexing::Slice(0, w / 2)}, 1.0);
  return Mask(m);
}

TEST(RmseLabTest, IdenticalFramesScoreZero) {
  torch::manual_seed(7);
  const Frame f(torch::rand({3, 8, 8}));
  const auto v = rmse_lab(f, f, half_mask(8, 8));
  EXPECT_EQ(*v.shadow, 0.0);
  EXPECT_EQ(*v.non_shadow, 0.0);
  EXPECT_EQ(*v.all, 0.0);
}

TEST(RmseLabTest, LightnessShiftOfThree) {
  torch::manual_seed(8);
  const auto gt = rgb_to_lab(torch::rand({3, 8, 8}));
  auto pred = gt.clone();
  pred[0] += 3.0;
  const auto v = MetricValues::from(lab_errors_from_lab(pred, gt, half_mask(8, 8)));
  EXPECT_NEAR(*v.shadow, std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(*v.non_shadow, std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(*v.all, std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(*v.mae_all, 1.0, 1e-12);
}

TEST(RmseLabTest, MatchesScalarLoopOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    torch::manual_seed(seed);
    const auto pred = torch::rand({3, 8, 8});
    const auto gt = torch::rand({3, 8, 8});
    const auto mask = (torch::rand({1, 8, 8}) > 0.5).to(torch::kFloat32);
    const auto v = rmse_lab(Frame(pred), Frame(gt), Mask(mask));
    const auto ref = testing::rmse_lab_scalar(pred, gt, mask);
    ASSERT_TRUE(v.shadow && ref.shadow);
    EXPECT_NEAR(*v.shadow, *ref.shadow, 1e-9);
    EXPECT_NEAR(*v.non_shadow, *ref.non_shadow, 1e-9);
    EXPECT_NEAR(*v.all, *ref.all, 1e-9);
  }
}

TEST(RmseLabTest, PermutationInvariantWithinRegion) {
  torch::manual_seed(9);
  const auto pred = torch::rand({3, 8, 8});
  const auto gt = torch::rand({3, 8, 8});
  const auto mask = half_mask(8, 8);
  const auto base = rmse_lab(Frame(pred), Frame(gt), mask);
  // Reverse the row order: each row keeps its left (shadow) and right halves.
  const auto flip = [](const torch::Tensor& t) { return t.flip({1}); };
  const auto moved = rmse_lab(Frame(flip(pred)), Frame(flip(gt)), mask);
  EXPECT_NEAR(*base.shadow, *moved.shadow, 1e-12);
  EXPECT_NEAR(*base.non_shadow, *moved.non_shadow, 1e-12);
}

TEST(RmseLabTest, EmptyRegionIsOmittedNotNaN) {
  torch::manual_seed(10);
  const Frame a(torch::rand({3, 8, 8}));
  const Frame b(torch::rand({3, 8, 8}));
  MetricAccumulator acc;
  acc.add("v0", a, b, Mask(torch::zeros({1, 8, 8})));
  const auto report = acc.report();
  EXPECT_FALSE(report.aggregate.shadow.has_value());
  EXPECT_TRUE(report.aggregate.non_shadow.has_value());
  const auto doc = nlohmann::json::parse(report.to_json());
  EXPECT_FALSE(doc.contains("shadow"));
  EXPECT_EQ(doc["empty_regions"], nlohmann::json::array({"shadow"}));
  EXPECT_TRUE(doc["per_video"].contains("v0"));
  EXPECT_EQ(report.to_json().find("NaN"), std::string::npos);
}

TEST(MetricAccumulatorTest, PoolsPixelsUnlessPerFrame) {
  torch::manual_seed(11);
  const Frame gt(torch::rand({3, 8, 8}));
  const Frame close(gt.tensor() * 0.99);
  const Frame far(torch::rand({3, 8, 8}));
  auto big = torch::zeros({1, 8, 8});
  big.index_put_({0, torch::indexing::Slice(0, 6)}, 1.0);
  auto small = torch::zeros({1, 8, 8});
  small[0][0][0] = 1.0;

  MetricAccumulator pooled;
  MetricAccumulator per_frame(true);
  for (auto* acc : {&pooled, &per_frame}) {
    acc->add("a", close, gt, Mask(big));
    acc->add("b", far, gt, Mask(small));
  }
  const auto e1 = lab_errors(close, gt, Mask(big));
  const auto e2 = lab_errors(far, gt, Mask(small));
  const double pooled_expected = std::sqrt((e1.shadow.sq_sum + e2.shadow.sq_sum) / (3.0 * 49.0));
  EXPECT_NEAR(*pooled.report().aggregate.shadow, pooled_expected, 1e-12);
  EXPECT_NEAR(*per_frame.report().aggregate.shadow, 0.5 * (*e1.shadow.rmse() + *e2.shadow.rmse()), 1e-12);
  const double lo = std::min(*e1.all.rmse(), *e2.all.rmse());
  const double hi = std::max(*e1.all.rmse(), *e2.all.rmse());
  EXPECT_GE(*pooled.report().aggregate.all, lo);
  EXPECT_LE(*pooled.report().aggregate.all, hi);
  EXPECT_EQ(pooled.report().per_video.size(), 2u);
}

}  // namespace
}  // namespace pstnet
