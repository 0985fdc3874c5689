#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gevd_mimo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or solve met a pivot at or below the positive-definiteness
/// threshold. Callers are expected to regularize and retry.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// Dense complex Hermitian matrix.
///
/// Entries are stored exactly Hermitian: construction from an arbitrary square
/// matrix keeps (M + M^H)/2, which is bitwise Hermitian in IEEE arithmetic.
/// Sums, differences and real scalings of Hermitian matrices stay exact.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(Eigen::Index dim) : m_(CMatrix::Zero(dim, dim)) {}

  static HermitianMatrix from(const CMatrix& m);
  static HermitianMatrix identity(Eigen::Index dim);
  static HermitianMatrix diagonal(const RVector& d);
  /// Outer product a·a^H.
  static HermitianMatrix outer(const CVector& a);

  Eigen::Index dim() const { return m_.rows(); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  double trace() const { return m_.diagonal().real().sum(); }
  double frobenius_norm() const { return m_.norm(); }

  HermitianMatrix& operator+=(const HermitianMatrix& o);
  HermitianMatrix& operator-=(const HermitianMatrix& o);
  HermitianMatrix& operator*=(double s);
  /// Adds s·I.
  HermitianMatrix& add_identity(double s);

  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

  /// T·H·T^H.
  HermitianMatrix congruence(const CMatrix& t) const;

 private:
  CMatrix m_;
};

struct EigenDecomposition {
  RVector values;   // descending
  CMatrix vectors;  // unitary, column r pairs with values[r]
};

/// Generalized eigendecomposition of a Hermitian-definite pencil {A, B}.
///
/// X^H·B·X = I, X^H·A·X = diag(eigenvalues), Q = X^{-H}, so that
/// A = Q·diag(eigenvalues)·Q^H and B = Q·Q^H.
struct GevdResult {
  RVector eigenvalues;  // descending
  CMatrix x;
  CMatrix q;
};

/// Lower-triangular L with L·L^H = H.
///
/// Throws NotPositiveDefinite when a pivot falls at or below
/// dim·eps·max|diag(H)|.
CMatrix cholesky(const HermitianMatrix& h);

EigenDecomposition hermitian_eig(const HermitianMatrix& h);

/// Whitens with the Cholesky factor of B, diagonalizes L^{-1}·A·L^{-H}, and
/// back-transforms.
GevdResult gevd(const HermitianMatrix& a, const HermitianMatrix& b);

/// H^{-1}·M for positive-definite H.
CMatrix solve_hermitian(const HermitianMatrix& h, const CMatrix& m);

/// Smallest eigenvalue of H.
double min_eigenvalue(const HermitianMatrix& h);

}  // namespace gevd_mimo
