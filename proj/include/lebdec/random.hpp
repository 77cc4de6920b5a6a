// Seeded generators of random PSD matrices and positive contractions, used
// by the property tests, the acceptance suite and the bundled self-test.
#pragma once

#include <cmath>
#include <random>

#include "lebdec/psd_core.hpp"

namespace lebdec::random {

using Engine = std::mt19937_64;

/// Haar-like random matrix with orthonormal columns (n x k), via QR of a
/// complex Gaussian matrix.
inline CMatrix orthonormal_columns(Index n, Index k, Engine& rng) {
  std::normal_distribution<double> g;
  CMatrix z(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<CMatrix> qr(z);
  return qr.householderQ() * CMatrix::Identity(n, k);
}

/// Eigenvalues log-uniform in [scale / ratio, scale].
inline RVector spectrum(Index k, double ratio, double scale, Engine& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVector ev(k);
  for (Index i = 0; i < k; ++i) ev(i) = scale * std::pow(ratio, -u(rng));
  return ev;
}

/// PSD matrix u diag(ev) u* for given orthonormal columns.
inline PsdMatrix from_spectrum(const CMatrix& u, const RVector& ev) {
  return PsdMatrix::hermitian_part(u * ev.cast<Complex>().asDiagonal() * u.adjoint());
}

/// Random rank-`rank` PSD matrix with eigenvalue ratio at most `ratio`.
inline PsdMatrix psd(Index n, Index rank, Engine& rng, double ratio = 1e3, double scale = 1.0) {
  if (rank == 0) return PsdMatrix::zero(n);
  return from_spectrum(orthonormal_columns(n, rank, rng), spectrum(rank, ratio, scale, rng));
}

/// Random strictly positive definite matrix.
inline PsdMatrix positive_definite(Index n, Engine& rng, double ratio = 1e3) {
  return psd(n, n, rng, ratio);
}

/// Random positive contraction with `ones` eigenvalues exactly equal to 1,
/// `zeros` exactly equal to 0 and the rest uniform in (0, 1).
inline PsdMatrix contraction(Index n, Index ones, Index zeros, Engine& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVector ev(n);
  for (Index i = 0; i < n; ++i) ev(i) = i < ones ? 1.0 : (i < ones + zeros ? 0.0 : u(rng));
  return from_spectrum(orthonormal_columns(n, n, rng), ev);
}

inline CVector vector(Index n, Engine& rng) {
  std::normal_distribution<double> g;
  CVector x(n);
  for (Index i = 0; i < n; ++i) x(i) = Complex(g(rng), g(rng));
  return x;
}

}  // namespace lebdec::random
