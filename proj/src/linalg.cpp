#include "gevd_mimo/linalg.hpp"

#include <algorithm>
#include <limits>

namespace gevd_mimo {

HermitianMatrix HermitianMatrix::from(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw Error("HermitianMatrix: matrix is not square");
  }
  HermitianMatrix h;
  h.m_ = (m + m.adjoint()) * 0.5;
  return h;
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index dim) {
  HermitianMatrix h;
  h.m_ = CMatrix::Identity(dim, dim);
  return h;
}

HermitianMatrix HermitianMatrix::diagonal(const RVector& d) {
  HermitianMatrix h(d.size());
  h.m_.diagonal() = d.cast<Complex>();
  return h;
}

HermitianMatrix HermitianMatrix::outer(const CVector& a) {
  return from(a * a.adjoint());
}

HermitianMatrix& HermitianMatrix::operator+=(const HermitianMatrix& o) {
  m_ += o.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator-=(const HermitianMatrix& o) {
  m_ -= o.m_;
  return *this;
}

HermitianMatrix& HermitianMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

HermitianMatrix& HermitianMatrix::add_identity(double s) {
  m_.diagonal().array() += s;
  return *this;
}

HermitianMatrix HermitianMatrix::congruence(const CMatrix& t) const {
  return from(t * m_ * t.adjoint());
}

CMatrix cholesky(const HermitianMatrix& h) {
  const Eigen::Index n = h.dim();
  if (n == 0) return CMatrix(0, 0);
  const double max_diag = h.matrix().diagonal().real().cwiseAbs().maxCoeff();
  const double tol =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

  Eigen::LLT<CMatrix> llt(h.matrix());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky: non-positive pivot");
  }
  CMatrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pivot = std::norm(l(i, i));
    if (!(pivot > tol)) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(i) +
                                " below tolerance");
    }
  }
  return l;
}

EigenDecomposition hermitian_eig(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix());
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("hermitian_eig: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

GevdResult gevd(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) {
    throw Error("gevd: pencil dimensions differ");
  }
  const CMatrix l = cholesky(b);
  const auto lower = l.triangularView<Eigen::Lower>();

  // C = L^{-1} A L^{-H}
  CMatrix tmp = lower.solve(a.matrix());
  CMatrix c = lower.solve(tmp.adjoint()).adjoint();
  const auto eig = hermitian_eig(HermitianMatrix::from(c));

  GevdResult out;
  out.eigenvalues = eig.values;
  out.x = lower.adjoint().solve(eig.vectors);
  out.q = l * eig.vectors;
  return out;
}

CMatrix solve_hermitian(const HermitianMatrix& h, const CMatrix& m) {
  if (h.dim() != m.rows()) {
    throw Error("solve_hermitian: dimension mismatch");
  }
  const CMatrix l = cholesky(h);
  const auto lower = l.triangularView<Eigen::Lower>();
  return lower.adjoint().solve(lower.solve(m));
}

double min_eigenvalue(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("min_eigenvalue: eigensolver did not converge");
  }
  return solver.eigenvalues()(0);
}

}  // namespace gevd_mimo
