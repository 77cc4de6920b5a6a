// Positive functionals on finite-dimensional unital *-algebras
// M_{n_1} + ... + M_{n_k}: GNS construction, induced forms, parallel sums
// and Lebesgue decomposition.
//
// A functional is stored by its block densities, w(a) = sum_i tr(rho_i a_i).
// Coordinates on the algebra use the matrix units E_kl of each block in
// block order, row-major within a block.
#pragma once

#include <algorithm>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

#include "lebdec/forms.hpp"

namespace lebdec {

class StarAlgebra {
 public:
  StarAlgebra() = default;
  explicit StarAlgebra(std::vector<Index> block_dims) : dims_(std::move(block_dims)) {
    if (dims_.empty()) throw InvalidInput("algebra must have at least one block");
    Index off = 0;
    for (Index d : dims_) {
      if (d <= 0) throw InvalidInput("algebra block dimensions must be positive");
      offsets_.push_back(off);
      off += d * d;
    }
    total_ = off;
  }

  const std::vector<Index>& block_dims() const noexcept { return dims_; }
  std::size_t num_blocks() const noexcept { return dims_.size(); }
  Index total_dim() const noexcept { return total_; }

  /// Coordinate index of the matrix unit E_kl in block i.
  Index index(std::size_t block, Index k, Index l) const {
    return offsets_[block] + k * dims_[block] + l;
  }

  friend bool operator==(const StarAlgebra& a, const StarAlgebra& b) { return a.dims_ == b.dims_; }

 private:
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

struct AlgebraElement {
  std::vector<CMatrix> blocks;

  static AlgebraElement zero(const StarAlgebra& alg) {
    AlgebraElement a;
    for (Index d : alg.block_dims()) a.blocks.push_back(CMatrix::Zero(d, d));
    return a;
  }
  static AlgebraElement unit(const StarAlgebra& alg) {
    AlgebraElement a;
    for (Index d : alg.block_dims()) a.blocks.push_back(CMatrix::Identity(d, d));
    return a;
  }
  /// The basis element with coordinate index p.
  static AlgebraElement matrix_unit(const StarAlgebra& alg, Index p) {
    AlgebraElement a = zero(alg);
    for (std::size_t i = 0; i < alg.num_blocks(); ++i) {
      const Index n = alg.block_dims()[i];
      const Index local = p - alg.index(i, 0, 0);
      if (local >= 0 && local < n * n) {
        a.blocks[i](local / n, local % n) = 1.0;
        return a;
      }
    }
    throw InvalidInput("matrix_unit: index out of range");
  }
  static AlgebraElement from_coordinates(const StarAlgebra& alg, const CVector& c) {
    require_same_dim(c.size(), alg.total_dim(), "from_coordinates");
    AlgebraElement a = zero(alg);
    for (std::size_t i = 0; i < alg.num_blocks(); ++i)
      for (Index k = 0; k < a.blocks[i].rows(); ++k)
        for (Index l = 0; l < a.blocks[i].cols(); ++l) a.blocks[i](k, l) = c(alg.index(i, k, l));
    return a;
  }

  void check_shape(const StarAlgebra& alg) const {
    if (blocks.size() != alg.num_blocks()) throw InvalidInput("element: wrong number of blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].rows() != alg.block_dims()[i] || blocks[i].cols() != alg.block_dims()[i])
        throw InvalidInput("element: block shape does not match the algebra");
  }

  CVector coordinates(const StarAlgebra& alg) const {
    check_shape(alg);
    CVector c(alg.total_dim());
    for (std::size_t i = 0; i < blocks.size(); ++i)
      for (Index k = 0; k < blocks[i].rows(); ++k)
        for (Index l = 0; l < blocks[i].cols(); ++l) c(alg.index(i, k, l)) = blocks[i](k, l);
    return c;
  }

  AlgebraElement adjoint() const {
    AlgebraElement a;
    for (const auto& b : blocks) a.blocks.push_back(b.adjoint());
    return a;
  }

  friend AlgebraElement operator*(const AlgebraElement& x, const AlgebraElement& y) {
    if (x.blocks.size() != y.blocks.size()) throw InvalidInput("element product: block mismatch");
    AlgebraElement a;
    for (std::size_t i = 0; i < x.blocks.size(); ++i) a.blocks.push_back(x.blocks[i] * y.blocks[i]);
    return a;
  }
};

struct Functional {
  StarAlgebra algebra;
  std::vector<PsdMatrix> densities;

  static Functional checked(const StarAlgebra& alg, const std::vector<CMatrix>& rho,
                            const Tolerances& tol = {}) {
    if (rho.size() != alg.num_blocks())
      throw InvalidInput("functional: one density per block is required");
    Functional w{alg, {}};
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (rho[i].rows() != alg.block_dims()[i])
        throw InvalidInput("functional: density shape does not match its block");
      w.densities.push_back(PsdMatrix::checked(rho[i], tol));
    }
    return w;
  }
  static Functional zero(const StarAlgebra& alg) {
    Functional w{alg, {}};
    for (Index d : alg.block_dims()) w.densities.push_back(PsdMatrix::zero(d));
    return w;
  }
};

inline Complex eval(const Functional& w, const AlgebraElement& a) {
  a.check_shape(w.algebra);
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.blocks.size(); ++i)
    s += (w.densities[i].matrix() * a.blocks[i]).trace();
  return s;
}

/// t_w(a, b) = w(b* a) over the matrix-unit basis.
inline SesquilinearForm induced_form(const Functional& w) {
  const StarAlgebra& alg = w.algebra;
  CMatrix g = CMatrix::Zero(alg.total_dim(), alg.total_dim());
  // w(E_kl* E_mn) = delta_km rho(n, l)
  for (std::size_t i = 0; i < alg.num_blocks(); ++i) {
    const Index n = alg.block_dims()[i];
    const CMatrix& rho = w.densities[i].matrix();
    for (Index k = 0; k < n; ++k)
      for (Index l = 0; l < n; ++l)
        for (Index m = 0; m < n; ++m) g(alg.index(i, k, l), alg.index(i, k, m)) = rho(m, l);
  }
  return {SesquilinearForm::default_labels(alg.total_dim()), PsdMatrix::hermitian_part(g)};
}

/// Recovers the functional w'(a) = t(a, 1) from a form on the algebra.
/// Densities are symmetrized and small negative eigenvalues (within
/// psd_slack) are clipped to zero.
inline Functional functional_from_form(const StarAlgebra& alg, const SesquilinearForm& t,
                                       const Tolerances& tol = {}) {
  require_same_dim(t.dim(), alg.total_dim(), "functional_from_form");
  const CVector unit = AlgebraElement::unit(alg).coordinates(alg);
  // row(q) = t(e_q, 1) = (1* G)_q
  const CVector row = (unit.adjoint() * t.gram().matrix()).transpose();
  Functional w{alg, {}};
  for (std::size_t i = 0; i < alg.num_blocks(); ++i) {
    const Index n = alg.block_dims()[i];
    CMatrix rho(n, n);
    for (Index l = 0; l < n; ++l)
      for (Index m = 0; m < n; ++m) rho(m, l) = row(alg.index(i, l, m));  // w(E_lm) = rho(m, l)
    rho = (rho + rho.adjoint()) / 2.0;
    const auto e = detail::eig_raw(rho, tol.recon_tol);
    const double floor = -tol.psd_slack * (1.0 + e.values.cwiseAbs().maxCoeff());
    if (e.min_value() < floor) {
      std::ostringstream os;
      os << "recovered density of block " << i << " is not positive (eigenvalue "
         << e.min_value() << ")";
      throw NumericalFailure(os.str(), -e.min_value());
    }
    w.densities.push_back(
        PsdMatrix::hermitian_part(e.apply([](double x) { return std::max(x, 0.0); })));
  }
  return w;
}

/// Left multiplication by `a` in matrix-unit coordinates.
inline CMatrix left_multiplication(const StarAlgebra& alg, const AlgebraElement& a) {
  a.check_shape(alg);
  CMatrix lm = CMatrix::Zero(alg.total_dim(), alg.total_dim());
  for (std::size_t i = 0; i < alg.num_blocks(); ++i) {
    const Index n = alg.block_dims()[i];
    for (Index k = 0; k < n; ++k)
      for (Index m = 0; m < n; ++m)
        for (Index l = 0; l < n; ++l) lm(alg.index(i, k, l), alg.index(i, m, l)) = a.blocks[i](k, m);
  }
  return lm;
}

/// GNS triplet of a functional. The space is the algebra modulo the kernel
/// of t_w, realized in an orthonormal basis: `to_space` maps coordinates of
/// a to the class [a], `from_space` is a right inverse of it.
class GnsTriplet {
 public:
  GnsTriplet(StarAlgebra alg, CMatrix to_space, CMatrix from_space)
      : alg_(std::move(alg)), to_(std::move(to_space)), from_(std::move(from_space)) {
    cyclic_ = to_ * AlgebraElement::unit(alg_).coordinates(alg_);
  }

  Index space_dim() const noexcept { return to_.rows(); }
  const CVector& cyclic_vector() const noexcept { return cyclic_; }

  CMatrix rep(const AlgebraElement& a) const {
    return to_ * left_multiplication(alg_, a) * from_;
  }
  CVector vector_of(const AlgebraElement& a) const { return to_ * a.coordinates(alg_); }

 private:
  StarAlgebra alg_;
  CMatrix to_;
  CMatrix from_;
  CVector cyclic_;
};

inline GnsTriplet gns(const Functional& w, const Tolerances& tol = {}) {
  const auto t = induced_form(w);
  const auto e = eig_hermitian(t.gram(), tol);
  const Index r = e.rank(tol.rank_rtol);
  const CMatrix vr = e.vectors.leftCols(r);
  const RVector sq = e.values.head(r).cwiseSqrt();
  // <[a], f_j> = t(a, f_j) with f_j = v_j / sqrt(lambda_j) orthonormal classes
  CMatrix to = sq.cast<Complex>().asDiagonal() * vr.adjoint();
  CMatrix from = vr * sq.cwiseInverse().cast<Complex>().asDiagonal();
  return {w.algebra, std::move(to), std::move(from)};
}

inline void require_same_algebra(const Functional& w, const Functional& v, const char* where) {
  if (!(w.algebra == v.algebra))
    throw InvalidInput(std::string(where) + ": functionals live on different algebras");
}

inline Functional functional_parallel_sum(const Functional& w, const Functional& v,
                                          const Tolerances& tol = {}) {
  require_same_algebra(w, v, "functional_parallel_sum");
  return functional_from_form(w.algebra,
                              form_parallel_sum(induced_form(w), induced_form(v), tol), tol);
}

struct FunctionalDecomposition {
  Functional ac;
  Functional sing;
  long iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

/// w = (w - w_s) + w_s with w - w_s the largest v-absolutely continuous
/// minorant of w.
inline FunctionalDecomposition functional_decompose(const Functional& w, const Functional& v,
                                                    Method method, const Tolerances& tol = {}) {
  require_same_algebra(w, v, "functional_decompose");
  const auto d = form_decompose(induced_form(w), induced_form(v), method, tol);
  return {functional_from_form(w.algebra, d.ac, tol), functional_from_form(w.algebra, d.sing, tol),
          d.iterations, d.residual, d.converged};
}

}  // namespace lebdec
