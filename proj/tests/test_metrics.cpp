#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "inrteach/metrics.hpp"
#include "inrteach/rng.hpp"
#include "oracles.hpp"

using namespace inrteach;

namespace {

MatrixXd random_image(Eigen::Index h, Eigen::Index w, Rng& rng) {
  MatrixXd m(h, w);
  for (auto& v : m.reshaped()) v = rng.uniform(0.0, 1.0);
  return m;
}

}  // namespace

TEST(Psnr, IdenticalIsInfinite) {
  Rng rng(1);
  const MatrixXd a = random_image(4, 4, rng);
  EXPECT_TRUE(std::isinf(psnr(a, a, 1.0)));
}

TEST(Psnr, TwentyDbAtMseOneHundredth) {
  const MatrixXd a = MatrixXd::Zero(2, 2);
  const MatrixXd b = MatrixXd::Constant(2, 2, 0.1);
  EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
  EXPECT_NEAR(psnr(a, b, 1.0), 20.0, 1e-12);
}

TEST(Psnr, MatchesFormulaSymmetricAndPermutationInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = random_image(8, 6, rng);
    const MatrixXd b = random_image(8, 6, rng);
    EXPECT_NEAR(psnr(a, b, 1.0), oracle::psnr_formula(a, b, 1.0), 1e-12);
    EXPECT_DOUBLE_EQ(psnr(a, b, 1.0), psnr(b, a, 1.0));
    std::vector<Eigen::Index> perm(48);
    for (Eigen::Index i = 0; i < 48; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd pa(8, 6), pb(8, 6);
    for (Eigen::Index i = 0; i < 48; ++i) {
      pa(i) = a(perm[static_cast<std::size_t>(i)]);
      pb(i) = b(perm[static_cast<std::size_t>(i)]);
    }
    EXPECT_NEAR(psnr(pa, pb, 1.0), psnr(a, b, 1.0), 1e-12);
  }
}

TEST(Psnr, RejectsBadInput) {
  EXPECT_THROW(psnr(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3), 1.0), std::invalid_argument);
  EXPECT_THROW(psnr(MatrixXd::Zero(2, 2), MatrixXd::Ones(2, 2), 0.0), std::invalid_argument);
  EXPECT_THROW(mse(MatrixXd(0, 0), MatrixXd(0, 0)), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
  Rng rng(3);
  const MatrixXd a = random_image(16, 20, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesLuminanceOnly) {
  const MatrixXd a = MatrixXd::Constant(11, 11, 0.2);
  const MatrixXd b = MatrixXd::Constant(11, 11, 0.7);
  EXPECT_NEAR(ssim(a, b), oracle::ssim_constant(0.2, 0.7), 1e-12);
  const MatrixXd c = MatrixXd::Constant(15, 13, 0.4);
  const MatrixXd d = MatrixXd::Constant(15, 13, 0.45);
  EXPECT_NEAR(ssim(c, d), oracle::ssim_constant(0.4, 0.45), 1e-12);
}

TEST(Ssim, NegativeImageScoresBelowZero) {
  MatrixXd a(16, 16);
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j) a(i, j) = (i + j) % 2 == 0 ? 0.1 : 0.9;
  const MatrixXd neg = (1.0 - a.array()).matrix();
  EXPECT_LT(ssim(a, neg), 0.0);
}

TEST(Ssim, SymmetricAndBounded) {
  Rng rng(4);
  const MatrixXd a = random_image(12, 12, rng);
  const MatrixXd b = random_image(12, 12, rng);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_GT(ssim(a, b), -1.0);
  EXPECT_THROW(ssim(MatrixXd::Zero(10, 10), MatrixXd::Zero(10, 10)), std::invalid_argument);
  EXPECT_THROW(ssim(a, MatrixXd::Zero(12, 13)), std::invalid_argument);
}

TEST(Iou, HandCases) {
  const std::vector<std::uint8_t> a{1, 1, 0, 0};
  const std::vector<std::uint8_t> b{0, 1, 1, 0};
  const std::vector<std::uint8_t> c{0, 0, 1, 1};
  const std::vector<std::uint8_t> empty(4, 0);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, c), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou(b, a), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou(empty, empty), 1.0);
  EXPECT_THROW(iou(a, std::vector<std::uint8_t>(3, 0)), std::invalid_argument);
}

TEST(Occupancy, ThresholdAtZeroAndMonotone) {
  const std::vector<double> sdf{-0.5, 0.0, 0.1, -1e-9, 2.0};
  EXPECT_EQ(occupancy_from_sdf(sdf), (std::vector<std::uint8_t>{1, 1, 0, 1, 0}));
  Rng rng(5);
  std::vector<double> field(200);
  for (auto& v : field) v = rng.normal();
  const auto base = occupancy_from_sdf(field);
  for (double shift : {0.01, 0.3, 1.0}) {
    std::vector<double> shrunk = field;
    for (auto& v : shrunk) v += shift;
    const auto occ = occupancy_from_sdf(shrunk);
    for (std::size_t i = 0; i < field.size(); ++i) EXPECT_LE(occ[i], base[i]);
  }
}

TEST(MetricReport, JsonInfinityAsString) {
  MetricReport r;
  r.mse = 0.0;
  r.psnr_db = std::numeric_limits<double>::infinity();
  nlohmann::json j = r;
  EXPECT_EQ(j["psnr_db"], "inf");
  EXPECT_TRUE(j["ssim"].is_null());
  r.psnr_db = 30.0;
  r.iou = 0.9;
  j = r;
  EXPECT_DOUBLE_EQ(j["psnr_db"].get<double>(), 30.0);
  EXPECT_DOUBLE_EQ(j["iou"].get<double>(), 0.9);
}
