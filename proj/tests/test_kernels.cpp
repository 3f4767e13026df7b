#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "inrteach/kernels.hpp"
#include "inrteach/rng.hpp"
#include "oracles.hpp"

using namespace inrteach;

namespace {

MatrixXd line(std::size_t n) {
  MatrixXd c(1, n);
  for (std::size_t i = 0; i < n; ++i) c(0, static_cast<Eigen::Index>(i)) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  return c;
}

}  // namespace

TEST(CanonicalKernel, RbfValues) {
  const auto k = CanonicalKernel::rbf(1.0);
  VectorXd x(2), y(2);
  x << 0.3, -0.2;
  y << 1.3, -0.2;
  EXPECT_DOUBLE_EQ(k(x, x), 1.0);
  EXPECT_NEAR(k(x, y), std::exp(-0.5), 1e-15);
  EXPECT_THROW(CanonicalKernel::rbf(0.0), std::invalid_argument);
  EXPECT_THROW(k(x, VectorXd::Zero(3)), std::invalid_argument);
}

TEST(CanonicalKernel, LinearIsDotProduct) {
  VectorXd x(2), y(2);
  x << 1.0, 2.0;
  y << -3.0, 0.5;
  EXPECT_DOUBLE_EQ(CanonicalKernel::linear()(x, y), -2.0);
}

TEST(MedianBandwidth, SmallCases) {
  MatrixXd c(1, 3);
  c << 0.0, 1.0, 3.0;  // distances 1, 3, 2
  EXPECT_DOUBLE_EQ(median_bandwidth(c), 2.0);
  MatrixXd d(1, 4);
  d << 0.0, 1.0, 2.0, 4.0;  // distances 1,2,4,1,3,2 -> sorted 1,1,2,2,3,4
  EXPECT_DOUBLE_EQ(median_bandwidth(d), 2.0);
  EXPECT_DOUBLE_EQ(median_bandwidth(MatrixXd::Zero(1, 1)), 1.0);
  EXPECT_DOUBLE_EQ(median_bandwidth(MatrixXd::Zero(2, 5)), 1.0);
}

TEST(Gram, RbfIsSymmetricPsdWithUnitDiagonal) {
  const auto km = gram(CanonicalKernel::rbf(0.3), line(20));
  EXPECT_EQ(km.size(), 20u);
  EXPECT_EQ(km.k, km.k.transpose());
  for (Eigen::Index i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(km.k(i, i), 1.0);
  EXPECT_GE(km.eig.eigenvalues.minCoeff(), -1e-12);
  EXPECT_LE((km.kbar - km.k / 20.0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(km.zeta(), 1.0);
}

TEST(Gram, LinearMatchesCoordinateProducts) {
  Rng rng(3);
  MatrixXd c(3, 6);
  for (auto& v : c.reshaped()) v = rng.normal();
  const auto km = gram(CanonicalKernel::linear(), c);
  EXPECT_LE((km.k - oracle::naive_matmul(c.transpose(), c)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KernelMatrix, FromGramMirrorsUpperTriangle) {
  MatrixXd k(2, 2);
  k << 1.0, 0.5, 99.0, 1.0;
  const auto km = KernelMatrix::from_gram(k);
  EXPECT_EQ(km.k(1, 0), 0.5);
  EXPECT_NEAR(km.eig.eigenvalues(0), 0.75, 1e-12);
  EXPECT_NEAR(km.eig.eigenvalues(1), 0.25, 1e-12);
}

TEST(KernelMatrix, RejectsIndefiniteAndMalformed) {
  MatrixXd k(2, 2);
  k << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(KernelMatrix::from_gram(k), std::invalid_argument);
  EXPECT_THROW(KernelMatrix::from_gram(MatrixXd::Zero(2, 3)), std::invalid_argument);
  EXPECT_THROW(gram(CanonicalKernel::rbf(1.0), MatrixXd(1, 0)), std::invalid_argument);
}

TEST(KernelMatrix, CsvHasOneRowPerPoint) {
  const auto km = gram(CanonicalKernel::rbf(1.0), line(3));
  std::ostringstream out;
  km.write_csv(out);
  std::istringstream in(out.str());
  std::string row;
  int rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 2);
  }
  EXPECT_EQ(rows, 3);
}

TEST(EmpiricalNtk, MatchesFiniteDifferenceJacobians) {
  const auto mlp = Mlp<double>::init(MlpArch::ffn(1, 1, 8, 3, 4, 1.0), 5);
  const MatrixXd coords = line(5);
  const auto km = empirical_ntk(mlp, coords);
  MatrixXd jac(mlp.param_count(), 5);
  for (Eigen::Index c = 0; c < 5; ++c) {
    const VectorXd x = coords.col(c);
    const auto f = [&](const VectorXd& theta) {
      return Mlp<double>(mlp.arch(), theta, mlp.fourier_basis(), 0).forward(x)(0, 0);
    };
    for (Eigen::Index i = 0; i < jac.rows(); ++i) jac(i, c) = oracle::central_difference(f, mlp.theta(), i, 1e-6);
  }
  const MatrixXd expected = oracle::naive_matmul(jac.transpose(), jac);
  EXPECT_LE((km.k - expected).cwiseAbs().maxCoeff(), 1e-6 * expected.cwiseAbs().maxCoeff());
}

TEST(EmpiricalNtk, ExactlySymmetricAndPsd) {
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 1, 16, 3), 1);
  Rng rng(1);
  MatrixXd coords(2, 12);
  for (auto& v : coords.reshaped()) v = rng.uniform(-1.0, 1.0);
  const auto km = empirical_ntk(mlp, coords);
  EXPECT_EQ(km.k, km.k.transpose());
  EXPECT_GE(km.eig.eigenvalues.minCoeff(), -1e-10 * km.eig.eigenvalues(0));
}

TEST(EmpiricalNtk, RejectsMultiOutput) {
  const auto mlp = Mlp<double>::init(MlpArch::siren(1, 2, 4, 2), 0);
  EXPECT_THROW(empirical_ntk(mlp, line(3)), std::domain_error);
}

TEST(NtkDrift, ZeroForIdenticalCheckpoints) {
  const auto mlp = Mlp<double>::init(MlpArch::siren(1, 1, 8, 3), 0);
  EXPECT_EQ(ntk_drift(mlp, mlp, line(6)), 0.0);
}

TEST(NtkDrift, PositiveAfterPerturbationAndRejectsArchMismatch) {
  const auto a = Mlp<double>::init(MlpArch::siren(1, 1, 8, 3), 0);
  auto b = a;
  b.theta() *= 1.1;
  EXPECT_GT(ntk_drift(a, b, line(6)), 0.0);
  const auto c = Mlp<double>::init(MlpArch::siren(1, 1, 9, 3), 0);
  EXPECT_THROW(ntk_drift(a, c, line(6)), std::invalid_argument);
}

TEST(KernelDrift, RelativeFrobenius) {
  const MatrixXd k0 = MatrixXd::Identity(2, 2);
  const MatrixXd k1 = 2.0 * MatrixXd::Identity(2, 2);
  EXPECT_DOUBLE_EQ(kernel_drift(k0, k1), 1.0);
  EXPECT_DOUBLE_EQ(kernel_drift(k1, k0), 0.5);
  EXPECT_THROW(kernel_drift(MatrixXd::Zero(2, 2), k1), std::invalid_argument);
  EXPECT_THROW(kernel_drift(k0, MatrixXd::Zero(3, 3)), std::invalid_argument);
}
