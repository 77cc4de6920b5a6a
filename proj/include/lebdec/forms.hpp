// Nonnegative sesquilinear forms on a finite-dimensional space, reduced to
// PSD matrices through their Gram matrix.
//
// Convention: gram(i, j) = t(e_j, e_i), so t(x, y) = y* G x and the induced
// operator T satisfies <Tx, y> = t(x, y).
#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lebdec/lebesgue.hpp"

namespace lebdec {

class SesquilinearForm {
 public:
  SesquilinearForm() = default;

  SesquilinearForm(std::vector<std::string> labels, PsdMatrix gram)
      : labels_(std::move(labels)), gram_(std::move(gram)) {
    if (static_cast<Index>(labels_.size()) != gram_.dim())
      throw InvalidInput("form: number of basis labels does not match Gram dimension");
    if (std::set<std::string>(labels_.begin(), labels_.end()).size() != labels_.size())
      throw InvalidInput("form: basis labels must be unique");
  }

  /// Validates positivity of a user-supplied Gram matrix.
  static SesquilinearForm checked(std::vector<std::string> labels, const CMatrix& gram,
                                  const Tolerances& tol = {}) {
    return {std::move(labels), PsdMatrix::checked(gram, tol)};
  }

  /// Labels "e1".."en".
  static std::vector<std::string> default_labels(Index n) {
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i) out.push_back("e" + std::to_string(i + 1));
    return out;
  }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const PsdMatrix& gram() const noexcept { return gram_; }
  Index dim() const noexcept { return gram_.dim(); }

  Complex operator()(const CVector& x, const CVector& y) const {
    require_same_dim(x.size(), dim(), "form evaluation");
    require_same_dim(y.size(), dim(), "form evaluation");
    return y.dot(gram_.matrix() * x);
  }
  double quadratic(const CVector& x) const { return (*this)(x, x).real(); }

 private:
  std::vector<std::string> labels_;
  PsdMatrix gram_;
};

struct FormDecomposition {
  SesquilinearForm ac;
  SesquilinearForm sing;
  long iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

/// Coordinate matrix of the operator T with <Tx, y> = t(x, y).
inline PsdMatrix induced_operator(const SesquilinearForm& t) { return t.gram(); }

inline void require_same_basis(const SesquilinearForm& t, const SesquilinearForm& w,
                               const char* where) {
  if (t.labels() != w.labels())
    throw InvalidInput(std::string(where) + ": forms are defined on different bases");
}

/// (t:w)[x] = inf_y { w[x - y] + t[y] }.
inline SesquilinearForm form_parallel_sum(const SesquilinearForm& t, const SesquilinearForm& w,
                                          const Tolerances& tol = {}) {
  require_same_basis(t, w, "form_parallel_sum");
  return {t.labels(), parallel_sum(induced_operator(t), induced_operator(w), tol)};
}

/// Splits t into its w-absolutely continuous and w-singular parts.
inline FormDecomposition form_decompose(const SesquilinearForm& t, const SesquilinearForm& w,
                                        Method method, const Tolerances& tol = {}) {
  require_same_basis(t, w, "form_decompose");
  auto d = decompose(induced_operator(w), induced_operator(t), method, tol);
  return {SesquilinearForm(t.labels(), std::move(d.ac)),
          SesquilinearForm(t.labels(), std::move(d.sing)), d.iterations, d.residual,
          d.converged};
}

}  // namespace lebdec
