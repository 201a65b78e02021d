#pragma once

// Small dense Hermitian helpers shared by the entropy and optimizer code.

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "orbcorr/fock.hpp"

namespace orbcorr::linalg {

using RealVector = Eigen::VectorXd;

struct HermitianEigen {
  RealVector values;  // ascending
  Matrix vectors;
};

inline HermitianEigen eigh(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

/// Applies f to the spectrum of a Hermitian matrix.
template <class F>
Matrix spectral_apply(const HermitianEigen& e, F&& f) {
  RealVector fv = e.values.unaryExpr(f);
  return e.vectors * fv.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

/// x ln x with the 0 ln 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Shannon entropy of a probability vector (nats).
inline double shannon(const RealVector& p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) s -= xlogx(p[i]);
  return s;
}

/// First divided difference of the logarithm, (ln a - ln b)/(a - b).
inline double log_divided_difference(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return std::numeric_limits<double>::infinity();
  const double d = a - b;
  if (std::abs(d) <= 1e-10 * std::max(a, b)) {
    const double x = d / b;
    return (1.0 - x / 2.0 + x * x / 3.0) / b;
  }
  return std::log1p(d / b) / d;
}

/// Frechet derivative of the matrix logarithm at a positive definite matrix
/// with spectral data `e`, applied to the direction `x`.
inline Matrix dlog(const HermitianEigen& e, const Matrix& x) {
  Matrix xt = e.vectors.adjoint() * x * e.vectors;
  const Eigen::Index n = xt.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) xt(i, j) *= log_divided_difference(e.values[i], e.values[j]);
  }
  return e.vectors * xt * e.vectors.adjoint();
}

/// Kronecker product of two dense matrices.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

/// Partial traces of an operator on C^da (x) C^db in Kronecker order.
inline Matrix trace_out_second(const Matrix& m, Eigen::Index da, Eigen::Index db) {
  Matrix out = Matrix::Zero(da, da);
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j)
      for (Eigen::Index k = 0; k < db; ++k) out(i, j) += m(i * db + k, j * db + k);
  return out;
}

inline Matrix trace_out_first(const Matrix& m, Eigen::Index da, Eigen::Index db) {
  Matrix out = Matrix::Zero(db, db);
  for (Eigen::Index i = 0; i < db; ++i)
    for (Eigen::Index j = 0; j < db; ++j)
      for (Eigen::Index k = 0; k < da; ++k) out(i, j) += m(k * db + i, k * db + j);
  return out;
}

/// Transpose of the second tensor factor.
inline Matrix partial_transpose_second(const Matrix& m, Eigen::Index da, Eigen::Index db) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index a = 0; a < da; ++a)
    for (Eigen::Index b = 0; b < db; ++b)
      for (Eigen::Index c = 0; c < da; ++c)
        for (Eigen::Index d = 0; d < db; ++d) out(a * db + b, c * db + d) = m(a * db + d, c * db + b);
  return out;
}

}  // namespace orbcorr::linalg
