// Parallel sum of positive semidefinite matrices and the absolutely
// continuous part obtained as the increasing limit of (nA):B.
#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "lebdec/psd_core.hpp"

namespace lebdec {

namespace detail {

/// Eigenbasis of the first argument of a parallel sum, split into its
/// numerical range (first `rank` columns) and kernel.
struct ShortingBasis {
  CMatrix u;
  RVector d;  ///< positive eigenvalues on the range
  Index rank = 0;
};

inline ShortingBasis make_shorting_basis(const PsdMatrix& a, const Tolerances& tol) {
  ShortingBasis s;
  if (a.dim() == 0) return s;
  auto e = eig_hermitian(a, tol);
  s.rank = e.rank(tol.rank_rtol);
  s.d = e.values.head(s.rank);
  s.u = std::move(e.vectors);
  return s;
}

/// (scale * A) : B where A is given by its shorting basis.
///
/// With A = diag(sD, 0) and B = [[P, Q], [Q*, R]] in that basis,
/// sA + B = L diag(M, S) L* for M = sD + P (positive definite) and the
/// Schur complement S = R - Q* M^-1 Q. Since ran B lies in ran(sA + B), the
/// product B (sA + B)^- B is the same for every generalized inverse, so
///   (sA):B = B - T* M^-1 T - W* S^+ W,   T = [P Q],  W = [Q* M^-1 sD, S].
/// Unlike sA (sA + B)^+ B, no pivot mixes the scales of sA and B.
inline PsdMatrix parallel_sum_scaled(const ShortingBasis& basis, double scale, const PsdMatrix& b,
                                     const Tolerances& tol) {
  const Index n = b.dim();
  const Index r = basis.rank;
  if (r == 0 || scale == 0.0) return PsdMatrix::zero(n);
  const Index k = n - r;

  const CMatrix bt = basis.u.adjoint() * b.matrix() * basis.u;
  const CMatrix p = bt.topLeftCorner(r, r);
  const CMatrix q = bt.topRightCorner(r, k);
  const CMatrix sd = (scale * basis.d).cast<Complex>().asDiagonal();

  const CMatrix m = (sd + p + (sd + p).adjoint()) / 2.0;
  const Eigen::LLT<CMatrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("parallel_sum: range block is not positive definite", INFINITY);

  CMatrix top(r, n);
  top << p, q;
  CMatrix g = top.adjoint() * llt.solve(top);

  if (k > 0) {
    const CMatrix minv_q = llt.solve(q);
    CMatrix s = bt.bottomRightCorner(k, k) - q.adjoint() * minv_q;
    s = (s + s.adjoint()) / 2.0;
    const auto es = detail::eig_raw(s, tol.recon_tol);
    const double cut = tol.rank_rtol * std::max(b.norm(), es.max_value());
    Index rs = 0;
    while (rs < k && es.values(rs) > cut) ++rs;
    if (rs > 0) {
      CMatrix w(k, n);
      w << minv_q.adjoint() * sd, s;
      // S^+ = V diag(1/sigma) V*, applied as a scaled projection onto V.
      const CMatrix vw = es.vectors.leftCols(rs).adjoint() * w;
      const RVector isqrt = es.values.head(rs).cwiseSqrt().cwiseInverse();
      const CMatrix half = isqrt.cast<Complex>().asDiagonal() * vw;
      g += half.adjoint() * half;
    }
  }
  return PsdMatrix::hermitian_part(basis.u * (bt - g) * basis.u.adjoint());
}

struct VariationalProblem {
  const CMatrix* a;
  const CMatrix* b;
  const CVector* x;
};

inline CVector unpack(const gsl_vector* v, Index n) {
  CVector y(n);
  for (Index i = 0; i < n; ++i) y(i) = Complex(gsl_vector_get(v, i), gsl_vector_get(v, n + i));
  return y;
}

inline double variational_f(const gsl_vector* v, void* params) {
  const auto& pr = *static_cast<const VariationalProblem*>(params);
  const CVector y = unpack(v, pr.x->size());
  const CVector z = *pr.x - y;
  return z.dot(*pr.a * z).real() + y.dot(*pr.b * y).real();
}

inline void variational_df(const gsl_vector* v, void* params, gsl_vector* df) {
  const auto& pr = *static_cast<const VariationalProblem*>(params);
  const Index n = pr.x->size();
  const CVector y = unpack(v, n);
  const CVector grad = 2.0 * (*pr.b * y - *pr.a * (*pr.x - y));
  for (Index i = 0; i < n; ++i) {
    gsl_vector_set(df, i, grad(i).real());
    gsl_vector_set(df, n + i, grad(i).imag());
  }
}

inline void variational_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* df) {
  *f = variational_f(v, params);
  variational_df(v, params, df);
}

}  // namespace detail

/// Parallel sum A:B, the PSD matrix with quadratic form
/// inf_y <A(x-y), x-y> + <By, y>; equal to A (A+B)^+ B.
inline PsdMatrix parallel_sum(const PsdMatrix& a, const PsdMatrix& b, const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "parallel_sum");
  return detail::parallel_sum_scaled(detail::make_shorting_basis(a, tol), 1.0, b, tol);
}

/// The textbook product A (A+B)^+ B, Hermitian part. Loses accuracy when the
/// scales of A and B differ widely; kept as a reference formula.
inline PsdMatrix parallel_sum_closed_form(const PsdMatrix& a, const PsdMatrix& b,
                                          const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "parallel_sum_closed_form");
  return PsdMatrix::hermitian_part(a.matrix() * pinv(a + b, tol).matrix() * b.matrix());
}

/// inf over y of <A(x-y), x-y> + <By, y>, found by quasi-Newton descent over
/// the real and imaginary coordinates of y. Never touches (A+B)^+.
inline double variational_value(const PsdMatrix& a, const PsdMatrix& b, const CVector& x,
                                 const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "variational_value");
  require_same_dim(a.dim(), x.size(), "variational_value");
  if (!x.allFinite()) throw InvalidInput("variational_value: x must be finite");
  const Index n = x.size();
  if (n == 0) return 0.0;

  detail::VariationalProblem problem{&a.matrix(), &b.matrix(), &x};
  gsl_multimin_function_fdf fn;
  fn.n = static_cast<std::size_t>(2 * n);
  fn.f = &detail::variational_f;
  fn.df = &detail::variational_df;
  fn.fdf = &detail::variational_fdf;
  fn.params = &problem;

  const double scale = (1.0 + a.norm() + b.norm()) * (1.0 + x.norm());
  const double grad_tol = 1e-11 * scale;
  const double accept_tol = 1e-8 * scale;

  // Status codes are inspected below; GSL must not abort the process.
  static const bool handler_silenced = (gsl_set_error_handler_off(), true);
  (void)handler_silenced;
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> start(gsl_vector_calloc(fn.n),
                                                                &gsl_vector_free);
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> solver(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, fn.n),
      &gsl_multimin_fdfminimizer_free);

  double best = detail::variational_f(start.get(), &problem);
  double best_grad = std::numeric_limits<double>::infinity();
  CVector best_y = CVector::Zero(n);
  bool done = false;
  // Restarts reset the curvature model after a stalled line search.
  for (int restart = 0; restart < 20 && !done; ++restart) {
    gsl_multimin_fdfminimizer_set(solver.get(), &fn, start.get(), 0.1 * (1.0 + x.norm()), 0.1);
    for (int iter = 0; iter < 10 * static_cast<int>(fn.n) + 200; ++iter) {
      const int status = gsl_multimin_fdfminimizer_iterate(solver.get());
      if (status != GSL_SUCCESS) break;
      if (gsl_multimin_test_gradient(solver->gradient, grad_tol) == GSL_SUCCESS) {
        done = true;
        break;
      }
    }
    const double g = gsl_blas_dnrm2(solver->gradient);
    if (solver->f <= best) {
      best = solver->f;
      best_grad = g;
      best_y = detail::unpack(solver->x, n);
    }
    if (g <= grad_tol) done = true;
    gsl_vector_memcpy(start.get(), solver->x);
  }

  // A stalled line search on an ill-conditioned quadratic is finished by
  // conjugate gradients, using only products with A and B.
  if (!done) {
    const CMatrix& am = a.matrix();
    const CMatrix& bm = b.matrix();
    CVector y = best_y;
    CVector r = am * x - (am + bm) * y;  // minus half the gradient
    CVector d = r;
    for (Index k = 0; k < 4 * n && 2.0 * r.norm() > grad_tol; ++k) {
      const CVector hd = am * d + bm * d;
      const double curv = d.dot(hd).real();
      if (!(curv > 0.0)) break;
      const double step = r.squaredNorm() / curv;
      y += step * d;
      const CVector r_next = r - step * hd;
      d = r_next + (r_next.squaredNorm() / r.squaredNorm()) * d;
      r = r_next;
    }
    const CVector z = x - y;
    const double f = z.dot(am * z).real() + y.dot(bm * y).real();
    const double g = 2.0 * (am * x - (am + bm) * y).norm();
    if (g < best_grad && f <= best + accept_tol) {
      best = std::min(best, f);
      best_grad = g;
    }
    done = best_grad <= grad_tol;
  }

  if (!done && !(best_grad <= accept_tol)) {
    std::ostringstream os;
    os << "variational_value: minimizer did not converge (best value " << best
       << ", gradient norm " << best_grad << ")";
    throw NumericalFailure(os.str(), best_grad);
  }
  return best;
}

struct AndoLimitResult {
  PsdMatrix ac_part;
  int terms_used = 0;
  double final_increment = 0.0;
  bool converged = false;
};

/// Increasing limit of (nA):B along n = 2^k, k = 0..40, i.e. the part of B
/// that is absolutely continuous with respect to A.
inline AndoLimitResult ando_ac_part(const PsdMatrix& a, const PsdMatrix& b,
                                    const Tolerances& tol = {}) {
  require_same_dim(a.dim(), b.dim(), "ando_ac_part");
  constexpr int kMaxDoublings = 40;
  const auto basis = detail::make_shorting_basis(a, tol);

  AndoLimitResult out;
  out.ac_part = detail::parallel_sum_scaled(basis, 1.0, b, tol);
  for (int k = 1; k <= kMaxDoublings; ++k) {
    PsdMatrix next = detail::parallel_sum_scaled(basis, std::ldexp(1.0, k), b, tol);
    const double inc = (next - out.ac_part).trace().real();
    out.ac_part = std::move(next);
    out.terms_used = k;
    out.final_increment = std::abs(inc);
    if (inc <= tol.iter_tol * (1.0 + out.ac_part.trace())) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Maps the positive contraction Bt through f(t) = t on [0, 1), f(1) = 0,
/// giving Bt minus the projection onto ker(I - Bt). Eigenvalues at or above
/// 1 - rank_rtol count as 1.
inline PsdMatrix spectral_ac_of_contraction(const PsdMatrix& bt, const Tolerances& tol = {}) {
  if (bt.dim() == 0) return bt;
  const auto e = eig_hermitian(bt, tol);
  if (e.min_value() < -tol.psd_slack || e.max_value() > 1.0 + tol.psd_slack) {
    std::ostringstream os;
    os << "spectral_ac_of_contraction: spectrum [" << e.min_value() << ", " << e.max_value()
       << "] is not inside [0, 1]";
    throw InvalidInput(os.str());
  }
  const double one = 1.0 - tol.rank_rtol;
  return PsdMatrix::hermitian_part(
      e.apply([one](double t) { return t >= one ? 0.0 : std::max(t, 0.0); }));
}

}  // namespace lebdec
