#include "inrteach/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace inrteach {

CanonicalKernel CanonicalKernel::rbf(double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("CanonicalKernel: bandwidth must be > 0");
  return {Kind::Rbf, bandwidth};
}

double CanonicalKernel::operator()(const Eigen::Ref<const VectorXd>& x,
                                   const Eigen::Ref<const VectorXd>& y) const {
  if (x.size() != y.size()) throw std::invalid_argument("CanonicalKernel: dimension mismatch");
  if (kind == Kind::Linear) return x.dot(y);
  return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

double median_bandwidth(const MatrixXd& coords) {
  const Eigen::Index n = coords.cols();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) dists.push_back((coords.col(i) - coords.col(j)).norm());
  if (dists.empty()) return 1.0;
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double median = *mid;
  if (dists.size() % 2 == 0) median = 0.5 * (median + *std::max_element(dists.begin(), mid));
  return median > 0.0 ? median : 1.0;
}

KernelMatrix KernelMatrix::from_gram(MatrixXd k) {
  if (k.rows() != k.cols() || k.rows() == 0)
    throw std::invalid_argument("KernelMatrix: Gram matrix must be square and non-empty");
  if (!k.allFinite()) throw std::invalid_argument("KernelMatrix: non-finite entry");
  k.triangularView<Eigen::StrictlyLower>() = k.transpose();
  KernelMatrix out;
  out.kbar = k / static_cast<double>(k.rows());
  out.k = std::move(k);
  out.eig = sym_eig(out.kbar);
  const double scale = std::max(1.0, out.eig.eigenvalues.cwiseAbs().maxCoeff());
  if (out.eig.eigenvalues.minCoeff() < -1e-10 * scale)
    throw std::invalid_argument("KernelMatrix: Gram matrix is not positive semidefinite");
  return out;
}

void KernelMatrix::write_csv(std::ostream& out) const {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) out << (j ? "," : "") << k(i, j);
    out << '\n';
  }
}

KernelMatrix gram(const CanonicalKernel& kernel, const MatrixXd& coords) {
  const Eigen::Index n = coords.cols();
  if (n == 0) throw std::invalid_argument("gram: no coordinates");
  if (!coords.allFinite()) throw std::invalid_argument("gram: non-finite coordinate");
  MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) k(i, j) = kernel(coords.col(i), coords.col(j));
  return KernelMatrix::from_gram(std::move(k));
}

template <class Scalar>
MatrixXd ntk_gram(const Mlp<Scalar>& mlp, const Matrix<Scalar>& coords) {
  if (mlp.arch().out_dim != 1)
    throw std::domain_error("empirical_ntk: only scalar-output networks are supported");
  const MatrixXd jac = mlp.batch_jacobian(coords).template cast<double>();
  MatrixXd k(jac.cols(), jac.cols());
  k.setZero();
  k.selfadjointView<Eigen::Upper>().rankUpdate(jac.transpose());
  k.triangularView<Eigen::StrictlyLower>() = k.transpose();
  return k;
}

template <class Scalar>
KernelMatrix empirical_ntk(const Mlp<Scalar>& mlp, const Matrix<Scalar>& coords) {
  return KernelMatrix::from_gram(ntk_gram(mlp, coords));
}

double kernel_drift(const MatrixXd& k0, const MatrixXd& k1) {
  if (k0.rows() != k1.rows() || k0.cols() != k1.cols())
    throw std::invalid_argument("kernel_drift: shape mismatch");
  const double denom = k0.norm();
  if (denom == 0.0) throw std::invalid_argument("kernel_drift: reference kernel is zero");
  return (k1 - k0).norm() / denom;
}

template <class Scalar>
double ntk_drift(const Mlp<Scalar>& before, const Mlp<Scalar>& after, const Matrix<Scalar>& coords) {
  if (!(before.arch() == after.arch()))
    throw std::invalid_argument("ntk_drift: checkpoints have different architectures");
  return kernel_drift(ntk_gram(before, coords), ntk_gram(after, coords));
}

template MatrixXd ntk_gram(const Mlp<float>&, const Matrix<float>&);
template MatrixXd ntk_gram(const Mlp<double>&, const Matrix<double>&);
template KernelMatrix empirical_ntk(const Mlp<float>&, const Matrix<float>&);
template KernelMatrix empirical_ntk(const Mlp<double>&, const Matrix<double>&);
template double ntk_drift(const Mlp<float>&, const Mlp<float>&, const Matrix<float>&);
template double ntk_drift(const Mlp<double>&, const Mlp<double>&, const Matrix<double>&);

}  // namespace inrteach
