// Lebesgue decomposition B = B_a + B_s of a PSD matrix with respect to A.
//
// Three routes are provided:
//   iterate  B_{n+1} = B_n - B_n:A, whose limit is the singular part;
//   direct   factor C = A + B = J J*, write A = J At J*, B = J Bt J* with
//            At + Bt = I, and take B_s = J P J* for P the projection onto
//            ker At;
//   ando     B_a as the increasing limit of (nA):B.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lebdec/parallel_sum.hpp"
#include "lebdec/psd_core.hpp"

namespace lebdec {

enum class Method { iterate, direct, ando };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::iterate: return "iterate";
    case Method::direct: return "direct";
    case Method::ando: return "ando";
  }
  return "unknown";
}

inline Method method_from_string(std::string_view s) {
  if (s == "iterate") return Method::iterate;
  if (s == "direct") return Method::direct;
  if (s == "ando") return Method::ando;
  throw InvalidInput("unknown method '" + std::string(s) + "'");
}

/// Finite-dimensional model of the auxiliary Hilbert space of C = A + B.
///
/// With C = U L U* and r = rank C, `embed` = U_r L_r^{1/2} so that
/// embed * embed* = C, and the contractions satisfy
/// A = embed * a_tilde * embed*, B = embed * b_tilde * embed*,
/// a_tilde + b_tilde = I_r.
struct AuxiliarySpace {
  Index rank = 0;
  CMatrix embed;
  PsdMatrix a_tilde;
  PsdMatrix b_tilde;

  PsdMatrix lift(const PsdMatrix& x) const {
    return PsdMatrix::hermitian_part(embed * x.matrix() * embed.adjoint());
  }
};

struct LebesgueDecomposition {
  PsdMatrix ac;
  PsdMatrix sing;
  Method method = Method::direct;
  long iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

/// X - X:A. Fixed exactly when X is singular with respect to A.
inline PsdMatrix mu_A(const PsdMatrix& x, const PsdMatrix& a, const Tolerances& tol = {}) {
  require_same_dim(x.dim(), a.dim(), "mu_A");
  return PsdMatrix::hermitian_part(x - parallel_sum(x, a, tol));
}

inline AuxiliarySpace auxiliary_space(const PsdMatrix& a, const PsdMatrix& b,
                                      const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "auxiliary_space");
  const Index n = a.dim();
  AuxiliarySpace aux;
  if (n == 0) return aux;
  const auto e = eig_hermitian(a + b, tol);
  aux.rank = e.rank(tol.rank_rtol);
  const Index r = aux.rank;
  const CMatrix ur = e.vectors.leftCols(r);
  const RVector sq = e.values.head(r).cwiseSqrt();
  aux.embed = ur * sq.cast<Complex>().asDiagonal();
  const CMatrix isq = sq.cwiseInverse().cast<Complex>().asDiagonal();
  aux.a_tilde = PsdMatrix::hermitian_part(isq * ur.adjoint() * a.matrix() * ur * isq);
  aux.b_tilde =
      PsdMatrix::hermitian_part(CMatrix::Identity(r, r) - aux.a_tilde.matrix());
  return aux;
}

/// Projection onto ker At in the auxiliary space; eigenvalues of At at or
/// below rank_rtol * lambda_max(At) count as kernel.
inline PsdMatrix auxiliary_kernel_projection(const AuxiliarySpace& aux,
                                             const Tolerances& tol = {}) {
  const Index r = aux.rank;
  if (r == 0) return PsdMatrix::zero(0);
  const auto e = eig_hermitian(aux.a_tilde, tol);
  const CMatrix ker = e.vectors.rightCols(r - e.rank(tol.rank_rtol));
  return PsdMatrix::hermitian_part(ker * ker.adjoint());
}

namespace detail {

inline bool is_exact_zero(const PsdMatrix& m) { return m.matrix().isZero(0.0); }

/// A = 0 gives (0, B); B = 0 gives (0, 0).
inline LebesgueDecomposition trivial_decomposition(const PsdMatrix& b, Method method) {
  LebesgueDecomposition d;
  d.method = method;
  d.ac = PsdMatrix::zero(b.dim());
  d.sing = b;
  return d;
}

inline bool has_trivial_decomposition(const PsdMatrix& a, const PsdMatrix& b) {
  return is_exact_zero(a) || is_exact_zero(b);
}

}  // namespace detail

/// Runs B_{n+1} = B_n - B_n:A until trace(B_n - B_{n+1}) <= iter_tol (1 + tr B).
/// The limit is the singular part; convergence can be slow when A is much
/// smaller than B on a shared subspace, so `converged` must be checked.
inline LebesgueDecomposition iterative_decompose(const PsdMatrix& a, const PsdMatrix& b,
                                               const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "iterative_decompose");
  if (detail::has_trivial_decomposition(a, b))
    return detail::trivial_decomposition(b, Method::iterate);

  const auto basis = detail::make_shorting_basis(a, tol);
  const double threshold = tol.iter_tol * (1.0 + b.trace());
  LebesgueDecomposition d;
  d.method = Method::iterate;
  d.converged = false;
  PsdMatrix x = b;
  for (long it = 1; it <= tol.max_iter; ++it) {
    const PsdMatrix step = detail::parallel_sum_scaled(basis, 1.0, x, tol);
    x = PsdMatrix::hermitian_part(x - step);
    d.iterations = it;
    d.residual = std::abs(step.trace());
    if (step.trace() <= threshold) {
      d.converged = true;
      break;
    }
  }
  d.sing = x;
  d.ac = PsdMatrix::hermitian_part(b - x);
  return d;
}

inline LebesgueDecomposition direct_decompose(const PsdMatrix& a, const PsdMatrix& b,
                                              const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "direct_decompose");
  if (detail::has_trivial_decomposition(a, b))
    return detail::trivial_decomposition(b, Method::direct);

  const auto aux = auxiliary_space(a, b, tol);
  const PsdMatrix pm = auxiliary_kernel_projection(aux, tol);
  LebesgueDecomposition d;
  d.method = Method::direct;
  d.sing = aux.lift(pm);
  d.ac = aux.lift(PsdMatrix::hermitian_part(aux.b_tilde - pm));
  d.residual = (b.matrix() - d.ac.matrix() - d.sing.matrix()).norm();
  return d;
}

/// ran B contained in ran A: the finite-dimensional form of B << A.
inline bool is_absolutely_continuous(const PsdMatrix& b, const PsdMatrix& a,
                                     const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "is_absolutely_continuous");
  const CMatrix p = range_projection(a, tol).matrix();
  return (p * b.matrix() * p - b.matrix()).norm() <= tol.recon_tol * (1.0 + b.norm());
}

inline double singularity_threshold(const PsdMatrix& a, const PsdMatrix& b) {
  return 1e-8 * (1.0 + a.norm() + b.norm());
}

/// A and B are mutually singular iff A:B = 0.
inline bool is_singular(const PsdMatrix& a, const PsdMatrix& b, const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "is_singular");
  return parallel_sum(a, b, tol).norm() <= singularity_threshold(a, b);
}

inline LebesgueDecomposition decompose(const PsdMatrix& a, const PsdMatrix& b, Method method,
                                       const Tolerances& tol = {}) {
  switch (method) {
    case Method::iterate: return iterative_decompose(a, b, tol);
    case Method::direct: return direct_decompose(a, b, tol);
    case Method::ando: {
      require_same_dim(a.dim(), b.dim(), "decompose");
      if (detail::has_trivial_decomposition(a, b))
        return detail::trivial_decomposition(b, Method::ando);
      auto limit = ando_ac_part(a, b, tol);
      LebesgueDecomposition d;
      d.method = Method::ando;
      d.sing = PsdMatrix::hermitian_part(b - limit.ac_part);
      d.ac = std::move(limit.ac_part);
      d.iterations = limit.terms_used;
      d.residual = limit.final_increment;
      d.converged = limit.converged;
      return d;
    }
  }
  throw InvalidInput("decompose: unknown method");
}

}  // namespace lebdec
