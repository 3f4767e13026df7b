#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace inrteach {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Eigendecomposition of a symmetric matrix: A = V diag(eigenvalues) V^T,
/// eigenvalues sorted descending, eigenvectors stored as orthonormal columns.
template <class Scalar>
struct SymEig {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }

  /// V^T x, the coordinates of x along each eigenvector.
  template <class Derived>
  Vector<Scalar> project(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != eigenvectors.rows())
      throw std::invalid_argument("SymEig::project: dimension mismatch");
    return eigenvectors.transpose() * x;
  }

  Matrix<Scalar> reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

namespace detail {

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

template <class Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& a, const char* what) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols())
    throw std::invalid_argument(std::string(what) + ": matrix is not square");
  require_finite(a, what);
  const Scalar scale = std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff());
  const Scalar tol = Scalar(1e-12) * scale;
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
}

}  // namespace detail

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
///
/// Sweeps over every (p, q) pair with p < q and annihilates a_pq with a plane
/// rotation until the largest off-diagonal magnitude drops to
/// tol * max(1, |A|_max). Intended for the small Gram matrices used here
/// (N up to a few thousand); cost per sweep is O(N^3).
///
/// Each eigenvector is oriented so that its last component above 1e-10 in
/// magnitude is positive. Order among equal eigenvalues is unspecified.
template <class Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& input,
                                         typename Derived::Scalar tol = 1e-12,
                                         int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  detail::require_symmetric(input, "sym_eig");
  const Eigen::Index n = input.rows();

  Matrix<Scalar> a = (input + input.transpose()) / Scalar(2);
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar threshold = tol * std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Scalar off = 0;
    for (Eigen::Index q = 1; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off = std::max(off, std::abs(a(p, q)));
    if (off <= threshold) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;

        // A <- J^T A J, applied as a column pass then a row pass.
        const Vector<Scalar> col_p = a.col(p);
        a.col(p) = c * col_p - s * a.col(q);
        a.col(q) = s * col_p + c * a.col(q);
        const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row_p = a.row(p);
        a.row(p) = c * row_p - s * a.row(q);
        a.row(q) = s * row_p + c * a.row(q);
        a(p, q) = a(q, p) = Scalar(0);

        const Vector<Scalar> vp = v.col(p);
        v.col(p) = c * vp - s * v.col(q);
        v.col(q) = s * vp + c * v.col(q);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymEig<Scalar> out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    Vector<Scalar> col = v.col(src);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (std::abs(col(i)) > Scalar(1e-10)) {
        if (col(i) < 0) col = -col;
        break;
      }
    }
    out.eigenvectors.col(k) = col;
  }
  return out;
}

/// exp(scale * A) for symmetric A, via its eigendecomposition.
template <class Derived>
Matrix<typename Derived::Scalar> sym_expm(const Eigen::MatrixBase<Derived>& a,
                                          typename Derived::Scalar scale) {
  using Scalar = typename Derived::Scalar;
  const SymEig<Scalar> eig = sym_eig(a);
  const Vector<Scalar> d = (scale * eig.eigenvalues.array()).exp().matrix();
  Matrix<Scalar> out = eig.eigenvectors * d.asDiagonal() * eig.eigenvectors.transpose();
  return (out + out.transpose()) / Scalar(2);
}

// Checked dense kernels. Eigen expressions are used directly inside the
// library; these are the boundary versions that reject shape mismatches.

template <class A, class X>
Vector<typename A::Scalar> matvec(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<X>& x) {
  if (x.cols() != 1 || a.cols() != x.rows())
    throw std::invalid_argument("matvec: dimension mismatch");
  return a * x;
}

template <class A, class B>
Matrix<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: dimension mismatch");
  return a * b;
}

template <class A>
Matrix<typename A::Scalar> transpose(const Eigen::MatrixBase<A>& a) {
  return a.transpose();
}

template <class X, class Y>
typename X::Scalar dot(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<Y>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: dimension mismatch");
  return x.reshaped().dot(y.reshaped());
}

template <class X>
typename X::Scalar norm2(const Eigen::MatrixBase<X>& x) {
  return x.norm();
}

}  // namespace inrteach
