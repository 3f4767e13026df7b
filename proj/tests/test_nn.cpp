#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "inrteach/nn.hpp"
#include "inrteach/rng.hpp"
#include "oracles.hpp"

using namespace inrteach;

namespace {

MatrixXd random_coords(std::size_t dim, std::size_t n, Rng& rng) {
  MatrixXd c(dim, n);
  for (auto& v : c.reshaped()) v = rng.uniform(-1.0, 1.0);
  return c;
}

double half_mse(const Mlp<double>& mlp, const MatrixXd& coords, const MatrixXd& targets) {
  const MatrixXd r = mlp.forward(coords) - targets;
  return 0.5 * r.squaredNorm() / static_cast<double>(coords.cols());
}

}  // namespace

TEST(MlpArch, ParamCountByHand) {
  // 2 -> 4 -> 4 -> 1: (4*2 + 4) + (4*4 + 4) + (1*4 + 1) = 37
  EXPECT_EQ(MlpArch::siren(2, 1, 4, 3).param_count(), 37u);
  // Fourier features double the first fan-in: 2*3 = 6 -> 5 -> 2.
  EXPECT_EQ(MlpArch::ffn(1, 2, 5, 2, 3, 1.0).param_count(), 5u * 7u + 2u * 6u);
  EXPECT_EQ(MlpArch::siren(2, 1, 128, 5).param_count(), 128u * 3u + 3u * 128u * 129u + 129u);
}

TEST(MlpArch, ValidateRejectsBadShapes) {
  EXPECT_THROW(MlpArch::siren(2, 1, 4, 1).validate(), std::invalid_argument);
  EXPECT_THROW(MlpArch::siren(0, 1, 4, 3).validate(), std::invalid_argument);
  EXPECT_THROW(MlpArch::siren(2, 1, 4, 3, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(MlpArch::ffn(1, 1, 4, 3, 0, 1.0).validate(), std::invalid_argument);
  EXPECT_THROW(MlpArch::ffn(1, 1, 4, 3, 8, -1.0).validate(), std::invalid_argument);
}

TEST(MlpArch, JsonRoundTrip) {
  const MlpArch a = MlpArch::ffn(3, 2, 16, 4, 32, 2.5);
  nlohmann::json j = a;
  EXPECT_EQ(j.get<MlpArch>(), a);
  const MlpArch s = MlpArch::siren(2, 3, 8, 3, 20.0);
  j = s;
  EXPECT_EQ(j.get<MlpArch>(), s);
}

TEST(Mlp, InitIsDeterministicAndSeedDependent) {
  const auto arch = MlpArch::siren(2, 1, 16, 4);
  const auto a = Mlp<double>::init(arch, 7);
  const auto b = Mlp<double>::init(arch, 7);
  const auto c = Mlp<double>::init(arch, 8);
  EXPECT_EQ(a.theta(), b.theta());
  EXPECT_NE(a.theta(), c.theta());
}

TEST(Mlp, BiasesStartAtZero) {
  for (const auto& arch : {MlpArch::siren(2, 3, 16, 4), MlpArch::ffn(1, 1, 8, 3, 4, 2.0)}) {
    const auto mlp = Mlp<double>::init(arch, 3);
    for (std::size_t l = 0; l < arch.depth; ++l) EXPECT_EQ(mlp.bias(l).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Mlp, SirenInitBounds) {
  const auto arch = MlpArch::siren(2, 1, 64, 3, 30.0);
  const auto mlp = Mlp<double>::init(arch, 1);
  EXPECT_LE(mlp.weight(0).cwiseAbs().maxCoeff(), 1.0 / 2.0);
  const double hidden = std::sqrt(6.0 / 64.0) / 30.0;
  EXPECT_LE(mlp.weight(1).cwiseAbs().maxCoeff(), hidden);
  EXPECT_GT(mlp.weight(1).cwiseAbs().maxCoeff(), 0.8 * hidden);
}

TEST(Mlp, ReluInitBoundsAndFourierBasis) {
  const auto arch = MlpArch::ffn(1, 1, 64, 3, 256, 2.0);
  const auto mlp = Mlp<double>::init(arch, 1);
  EXPECT_LE(mlp.weight(1).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 64.0));
  const auto& b = mlp.fourier_basis();
  ASSERT_EQ(b.rows(), 256);
  const double var = b.squaredNorm() / static_cast<double>(b.size());
  EXPECT_NEAR(std::sqrt(var), 2.0, 0.3);
}

TEST(Mlp, WeightOffsetsFollowLayout) {
  const auto arch = MlpArch::siren(2, 1, 4, 3);
  const auto mlp = Mlp<double>::init(arch, 0);
  EXPECT_EQ(mlp.weight_offset(0), 0u);
  EXPECT_EQ(mlp.weight_offset(1), 8u);
  EXPECT_EQ(mlp.weight_offset(2), 24u);
  EXPECT_EQ(mlp.bias_offset(0), 28u);
  EXPECT_EQ(mlp.bias_offset(2), 36u);
}

TEST(Mlp, ForwardOfHandBuiltReluNetwork) {
  MlpArch arch = MlpArch::siren(1, 1, 2, 2);
  arch.activation = Activation::relu();
  VectorXd theta(7);
  // W0 = [1; -1], W1 = [2, 3], b0 = [0; 0.5], b1 = [0.25]
  theta << 1.0, -1.0, 2.0, 3.0, 0.0, 0.5, 0.25;
  const Mlp<double> mlp(arch, theta, MatrixXd(), 0);
  MatrixXd x(1, 2);
  x << 0.5, -1.0;
  const MatrixXd y = mlp.forward(x);
  EXPECT_DOUBLE_EQ(y(0, 0), 2.0 * 0.5 + 3.0 * 0.0 + 0.25);
  EXPECT_DOUBLE_EQ(y(0, 1), 2.0 * 0.0 + 3.0 * 1.5 + 0.25);
}

TEST(Mlp, ForwardOfHandBuiltSineNetwork) {
  const MlpArch arch = MlpArch::siren(1, 1, 1, 2, 2.0);
  VectorXd theta(4);
  theta << 0.5, 3.0, 0.1, -1.0;
  const Mlp<double> mlp(arch, theta, MatrixXd(), 0);
  MatrixXd x(1, 1);
  x << 0.7;
  EXPECT_NEAR(mlp.forward(x)(0, 0), 3.0 * std::sin(2.0 * (0.5 * 0.7 + 0.1)) - 1.0, 1e-15);
}

TEST(Mlp, OutputsDoNotDependOnBatchComposition) {
  Rng rng(2);
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 3, 32, 4), 5);
  const MatrixXd coords = random_coords(2, 10, rng);
  const MatrixXd all = mlp.forward(coords);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const MatrixXd one = mlp.forward(coords.col(i));
    EXPECT_LE((one - all.col(i)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  for (const auto& arch : {MlpArch::siren(2, 2, 8, 3, 30.0), MlpArch::ffn(1, 1, 8, 3, 4, 2.0)}) {
    const auto base = Mlp<double>::init(arch, 11);
    const MatrixXd coords = random_coords(arch.in_dim, 6, rng);
    MatrixXd targets(arch.out_dim, 6);
    for (auto& v : targets.reshaped()) v = rng.uniform(-1.0, 1.0);

    VectorXd grad;
    base.fit_gradient(coords, targets, grad);
    const auto loss = [&](const VectorXd& theta) {
      return half_mse(Mlp<double>(arch, theta, base.fourier_basis(), 0), coords, targets);
    };
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      const double fd = oracle::central_difference(loss, base.theta(), i, 1e-6);
      EXPECT_NEAR(grad(i), fd, 1e-6 * std::max(1.0, std::abs(fd))) << "parameter " << i;
    }
  }
}

TEST(Mlp, BackwardWithExplicitOutputGradient) {
  Rng rng(4);
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 2, 8, 3), 1);
  const MatrixXd coords = random_coords(2, 5, rng);
  MatrixXd targets(2, 5);
  for (auto& v : targets.reshaped()) v = rng.normal();
  VectorXd grad;
  const MatrixXd out = mlp.fit_gradient(coords, targets, grad);
  EXPECT_LE((out - mlp.forward(coords)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((mlp.backward(coords, out - targets) - grad).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mlp, PerExampleJacobianMatchesBatchAndFiniteDifferences) {
  Rng rng(5);
  const auto mlp = Mlp<double>::init(MlpArch::ffn(1, 1, 6, 3, 3, 1.5), 2);
  const MatrixXd coords = random_coords(1, 4, rng);
  const MatrixXd batch = mlp.batch_jacobian(coords);
  ASSERT_EQ(batch.rows(), static_cast<Eigen::Index>(mlp.param_count()));
  for (Eigen::Index c = 0; c < 4; ++c) {
    const VectorXd x = coords.col(c);
    const MatrixXd j = mlp.per_example_jacobian(x);
    EXPECT_LE((j.col(0) - batch.col(c)).cwiseAbs().maxCoeff(), 1e-14);
    const auto f = [&](const VectorXd& theta) {
      return Mlp<double>(mlp.arch(), theta, mlp.fourier_basis(), 0).forward(x)(0, 0);
    };
    for (Eigen::Index i = 0; i < j.rows(); ++i)
      EXPECT_NEAR(j(i, 0), oracle::central_difference(f, mlp.theta(), i, 1e-6), 1e-7);
  }
}

TEST(Mlp, BatchJacobianRejectsMultiOutput) {
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 3, 4, 2), 0);
  EXPECT_THROW(mlp.batch_jacobian(MatrixXd::Zero(2, 3)), std::domain_error);
}

TEST(Mlp, RejectsMismatchedInputs) {
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 1, 4, 2), 0);
  EXPECT_THROW(mlp.forward(MatrixXd::Zero(3, 2)), std::invalid_argument);
  MatrixXd bad = MatrixXd::Zero(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(mlp.forward(bad), std::invalid_argument);
  VectorXd grad;
  EXPECT_THROW(mlp.fit_gradient(MatrixXd::Zero(2, 2), MatrixXd::Zero(1, 3), grad), std::invalid_argument);
  EXPECT_THROW(Mlp<double>(mlp.arch(), VectorXd::Zero(3), MatrixXd(), 0), std::invalid_argument);
}

TEST(Mlp, FloatCastAgreesWithDouble) {
  Rng rng(6);
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 1, 16, 3), 4);
  const auto f = mlp.cast<float>();
  const MatrixXd coords = random_coords(2, 8, rng);
  const MatrixXd a = mlp.forward(coords);
  const MatrixXd b = f.forward(coords.cast<float>()).cast<double>();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Weights, EncodeDecodeRoundTrip) {
  const auto mlp = Mlp<double>::init(MlpArch::ffn(2, 3, 8, 3, 5, 1.5), 9);
  const auto back = decode_weights<double>(encode_weights(mlp));
  EXPECT_EQ(back.arch(), mlp.arch());
  EXPECT_EQ(back.theta(), mlp.theta());
  EXPECT_EQ(back.seed(), 9u);
  // The Fourier basis is regenerated from the stored seed.
  EXPECT_EQ(back.fourier_basis(), mlp.fourier_basis());
}

TEST(Weights, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "inrteach_test_weights.inrw";
  const auto mlp = Mlp<float>::init(MlpArch::siren(2, 1, 8, 3), 3);
  save_weights(mlp, path);
  const auto back = load_weights<float>(path);
  EXPECT_EQ(back.theta(), mlp.theta());
  std::filesystem::remove(path);
}

TEST(Weights, RejectsCorruptFiles) {
  const auto mlp = Mlp<double>::init(MlpArch::siren(2, 1, 4, 2), 0);
  const std::string good = encode_weights(mlp);
  EXPECT_THROW(decode_weights<double>(good.substr(0, good.size() - 3)), std::runtime_error);
  EXPECT_THROW(decode_weights<double>("no newline here"), std::runtime_error);
  EXPECT_THROW(decode_weights<double>("{not json}\n"), std::runtime_error);
  EXPECT_THROW(load_weights<double>("/nonexistent/weights.inrw"), std::runtime_error);
}
