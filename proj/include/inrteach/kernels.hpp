#pragma once

#include <iosfwd>

#include "inrteach/linalg.hpp"
#include "inrteach/nn.hpp"

namespace inrteach {

/// Fixed positive-definite kernel on coordinates (stored column-wise).
struct CanonicalKernel {
  enum class Kind { Rbf, Linear };

  Kind kind = Kind::Rbf;
  double bandwidth = 1.0;

  static CanonicalKernel rbf(double bandwidth);
  static CanonicalKernel linear() { return {Kind::Linear, 1.0}; }

  double operator()(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y) const;
};

/// Median pairwise Euclidean distance of the coordinate set, the default RBF
/// bandwidth. Returns 1 when all points coincide or N < 2.
double median_bandwidth(const MatrixXd& coords);

/// Gram matrix K, its normalized form K/N, and the eigendecomposition of K/N.
struct KernelMatrix {
  MatrixXd k;
  MatrixXd kbar;
  SymEig<double> eig;

  /// Takes the upper triangle of `k` as authoritative and mirrors it. Throws
  /// std::invalid_argument if the result is not PSD to within 1e-10.
  static KernelMatrix from_gram(MatrixXd k);

  std::size_t size() const { return static_cast<std::size_t>(k.rows()); }
  /// Largest entry magnitude, the bound on the kernel used by the
  /// loss-reduction monitor.
  double zeta() const { return k.cwiseAbs().maxCoeff(); }

  void write_csv(std::ostream& out) const;
};

KernelMatrix gram(const CanonicalKernel& kernel, const MatrixXd& coords);

/// Raw N x N Gram of per-example parameter Jacobians of a scalar network.
template <class Scalar>
MatrixXd ntk_gram(const Mlp<Scalar>& mlp, const Matrix<Scalar>& coords);

/// Empirical NTK K_ij = <df(x_i)/dtheta, df(x_j)/dtheta> at the current
/// parameters. Multi-output networks throw std::domain_error.
template <class Scalar>
KernelMatrix empirical_ntk(const Mlp<Scalar>& mlp, const Matrix<Scalar>& coords);

/// |K1 - K0|_F / |K0|_F. Not symmetric in its arguments.
double kernel_drift(const MatrixXd& k0, const MatrixXd& k1);

/// Relative Frobenius drift of the empirical NTK between two checkpoints of
/// the same architecture.
template <class Scalar>
double ntk_drift(const Mlp<Scalar>& before, const Mlp<Scalar>& after, const Matrix<Scalar>& coords);

}  // namespace inrteach
