// Dense complex Hermitian kernels: eigendecomposition, pseudoinverse,
// range projections and Loewner-order comparisons.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace lebdec {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Input that violates a precondition (shape, symmetry, positivity).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical routine failed to meet its own accuracy contract.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct Tolerances {
  double rank_rtol = 1e-10;  ///< relative eigenvalue cutoff for rank decisions
  double psd_slack = 1e-10;  ///< slack for order tests, scaled by matrix norm
  double iter_tol = 1e-10;   ///< stopping tolerance for monotone iterations
  long max_iter = 1'000'000;
  double recon_tol = 1e-9;   ///< reconstruction / identity residual tolerance

  void validate() const {
    if (!(rank_rtol > 0) || !(psd_slack > 0) || !(iter_tol > 0) || !(recon_tol > 0))
      throw InvalidInput("tolerances must be strictly positive");
    if (max_iter < 1) throw InvalidInput("max_iter must be at least 1");
  }
};

inline void require_same_dim(Index a, Index b, const char* where) {
  if (a != b) {
    std::ostringstream os;
    os << where << ": dimension mismatch (" << a << " vs " << b << ")";
    throw InvalidInput(os.str());
  }
}

/// Hermitian matrix intended to be positive semidefinite.
///
/// Storage is always exactly Hermitian: every constructor replaces its
/// argument by (M + M*)/2. Positivity is checked only by `checked`; results
/// of the library's own operations are PSD up to rounding and are built
/// through `hermitian_part`.
class PsdMatrix {
 public:
  PsdMatrix() = default;

  /// Validates symmetry and positivity of user-supplied data.
  static PsdMatrix checked(const CMatrix& m, const Tolerances& tol = {});

  /// Hermitian part of `m` without further checks.
  static PsdMatrix hermitian_part(const CMatrix& m) {
    if (m.rows() != m.cols()) throw InvalidInput("matrix must be square");
    PsdMatrix p;
    p.m_ = (m + m.adjoint()) / 2.0;
    return p;
  }

  static PsdMatrix zero(Index n) { return hermitian_part(CMatrix::Zero(n, n)); }
  static PsdMatrix identity(Index n) { return hermitian_part(CMatrix::Identity(n, n)); }
  static PsdMatrix diagonal(const RVector& d) {
    return hermitian_part(d.cast<Complex>().asDiagonal().toDenseMatrix());
  }

  Index dim() const noexcept { return m_.rows(); }
  const CMatrix& matrix() const noexcept { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }
  double norm() const { return m_.norm(); }

  PsdMatrix scaled(double s) const { return hermitian_part(s * m_); }

  friend PsdMatrix operator+(const PsdMatrix& a, const PsdMatrix& b) {
    require_same_dim(a.dim(), b.dim(), "operator+");
    return hermitian_part(a.m_ + b.m_);
  }
  /// Difference as a raw Hermitian matrix; it need not be PSD.
  friend CMatrix operator-(const PsdMatrix& a, const PsdMatrix& b) {
    require_same_dim(a.dim(), b.dim(), "operator-");
    return a.m_ - b.m_;
  }

 private:
  CMatrix m_;
};

struct EigenDecomposition {
  RVector values;   ///< sorted descending
  CMatrix vectors;  ///< unitary, columns are eigenvectors

  double max_value() const { return values.size() ? values(0) : 0.0; }
  double min_value() const { return values.size() ? values(values.size() - 1) : 0.0; }

  /// Number of eigenvalues strictly above rank_rtol * max(lambda_max, 0).
  Index rank(double rank_rtol) const {
    const double cut = rank_rtol * std::max(max_value(), 0.0);
    Index r = 0;
    while (r < values.size() && values(r) > cut && values(r) > 0.0) ++r;
    return r;
  }

  CMatrix apply(auto&& f) const {
    RVector mapped(values.size());
    for (Index i = 0; i < values.size(); ++i) mapped(i) = f(values(i));
    return vectors * mapped.cast<Complex>().asDiagonal() * vectors.adjoint();
  }
};

namespace detail {

inline EigenDecomposition eig_raw(const CMatrix& m, double recon_tol) {
  EigenDecomposition out;
  const Index n = m.rows();
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalFailure("eig_hermitian: eigensolver did not converge", INFINITY);
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();

  const CMatrix rebuilt =
      out.vectors * out.values.cast<Complex>().asDiagonal() * out.vectors.adjoint();
  const double recon = (m - rebuilt).norm();
  const double orth = (out.vectors.adjoint() * out.vectors - CMatrix::Identity(n, n)).norm();
  if (recon > recon_tol * (1.0 + m.norm()) || orth > recon_tol) {
    std::ostringstream os;
    os << "eig_hermitian: reconstruction residual " << recon << ", orthogonality residual "
       << orth;
    throw NumericalFailure(os.str(), std::max(recon, orth));
  }
  return out;
}

}  // namespace detail

inline EigenDecomposition eig_hermitian(const PsdMatrix& m, const Tolerances& tol = {}) {
  return detail::eig_raw(m.matrix(), tol.recon_tol);
}

inline PsdMatrix PsdMatrix::checked(const CMatrix& m, const Tolerances& tol) {
  if (m.rows() != m.cols()) throw InvalidInput("matrix must be square");
  if (!m.allFinite()) throw InvalidInput("matrix has non-finite entries");
  const double asym = (m - m.adjoint()).norm();
  if (asym > tol.recon_tol * (1.0 + m.norm())) {
    std::ostringstream os;
    os << "matrix is not Hermitian (asymmetry " << asym << ")";
    throw InvalidInput(os.str());
  }
  PsdMatrix p = hermitian_part(m);
  if (p.dim() > 0) {
    const auto e = eig_hermitian(p, tol);
    const double floor = -tol.psd_slack * (1.0 + e.values.cwiseAbs().maxCoeff());
    if (e.min_value() < floor) {
      std::ostringstream os;
      os << "matrix is not positive semidefinite (smallest eigenvalue " << e.min_value() << ")";
      throw InvalidInput(os.str());
    }
  }
  return p;
}

/// Moore-Penrose pseudoinverse; eigenvalues at or below rank_rtol * lambda_max
/// are treated as zero.
inline PsdMatrix pinv(const PsdMatrix& m, const Tolerances& tol = {}) {
  if (m.dim() == 0) return m;
  const auto e = eig_hermitian(m, tol);
  const Index r = e.rank(tol.rank_rtol);
  const CMatrix u = e.vectors.leftCols(r);
  const RVector inv = e.values.head(r).cwiseInverse();
  return PsdMatrix::hermitian_part(u * inv.cast<Complex>().asDiagonal() * u.adjoint());
}

/// Orthogonal projection onto the numerical range of `m`.
inline PsdMatrix range_projection(const PsdMatrix& m, const Tolerances& tol = {}) {
  if (m.dim() == 0) return m;
  const auto e = eig_hermitian(m, tol);
  const CMatrix u = e.vectors.leftCols(e.rank(tol.rank_rtol));
  return PsdMatrix::hermitian_part(u * u.adjoint());
}

inline PsdMatrix kernel_projection(const PsdMatrix& m, const Tolerances& tol = {}) {
  return PsdMatrix::hermitian_part(CMatrix::Identity(m.dim(), m.dim()) -
                                   range_projection(m, tol).matrix());
}

/// Smallest eigenvalue of a Hermitian matrix given as raw storage.
inline double min_eigenvalue(const CMatrix& h) {
  if (h.rows() == 0) return 0.0;
  const CMatrix sym = (h + h.adjoint()) / 2.0;
  return Eigen::SelfAdjointEigenSolver<CMatrix>(sym, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// A <= B in the Loewner order, with slack psd_slack * (1 + ||B||_F).
inline bool loewner_leq(const PsdMatrix& a, const PsdMatrix& b, const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "loewner_leq");
  return min_eigenvalue(b - a) >= -tol.psd_slack * (1.0 + b.norm());
}

}  // namespace lebdec
