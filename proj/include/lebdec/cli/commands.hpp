// The psum, decompose and check commands.
//
// Every problem kind is reduced to a pair of PSD operators: a reference A
// and a target B that is decomposed with respect to A. Forms use their Gram
// matrices, functionals the Gram matrix of their induced form. Diagnostics
// are computed on that operator level; results are emitted in the shape of
// the input kind.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include "lebdec/cli/json_io.hpp"

namespace lebdec::cli {

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

enum class Command { psum, decompose, check };

inline std::string to_string(Command c) {
  switch (c) {
    case Command::psum: return "psum";
    case Command::decompose: return "decompose";
    case Command::check: return "check";
  }
  return "unknown";
}

struct RunOptions {
  ToleranceOverrides flags;  ///< command-line overrides; they win over the file
  Method method = Method::direct;
  bool cross_check = false;
};

/// A validated problem. `reference` and `target` are the operator-level A and B.
struct Problem {
  ProblemKind kind = ProblemKind::operator_pair;
  Tolerances tol;
  PsdMatrix reference, target;
  SesquilinearForm t_form, w_form;
  Functional w_fun, v_fun;
};

/// Checks positivity and merges tolerances: defaults, then file, then flags.
inline Problem validate(const ProblemFile& file, const ToleranceOverrides& flags) {
  Problem p;
  p.kind = file.kind;
  if (file.tolerances) file.tolerances->apply(p.tol);
  flags.apply(p.tol);
  p.tol.validate();
  switch (file.kind) {
    case ProblemKind::operator_pair:
      p.reference = PsdMatrix::checked(file.a, p.tol);
      p.target = PsdMatrix::checked(file.b, p.tol);
      break;
    case ProblemKind::form_pair:
      p.t_form = SesquilinearForm::checked(file.basis, file.t, p.tol);
      p.w_form = SesquilinearForm::checked(file.basis, file.w, p.tol);
      p.reference = p.w_form.gram();
      p.target = p.t_form.gram();
      break;
    case ProblemKind::functional_pair: {
      const StarAlgebra alg(file.blocks);
      p.w_fun = Functional::checked(alg, file.w_rho, p.tol);
      p.v_fun = Functional::checked(alg, file.v_rho, p.tol);
      p.reference = induced_form(p.v_fun).gram();
      p.target = induced_form(p.w_fun).gram();
      break;
    }
  }
  return p;
}

namespace detail {

inline json densities_json(const Functional& f) {
  json out = json::array();
  for (const auto& rho : f.densities) out.push_back(matrix_to_json(rho.matrix()));
  return out;
}

inline json form_json(const SesquilinearForm& t) {
  return {{"basis", t.labels()}, {"gram", matrix_to_json(t.gram().matrix())}};
}

inline json functional_json(const Functional& f) {
  return {{"blocks", f.algebra.block_dims()}, {"densities", densities_json(f)}};
}

inline double fro(const CMatrix& m) { return m.norm(); }

inline double range_leak(const PsdMatrix& x, const PsdMatrix& reference, const Tolerances& tol) {
  const CMatrix p = range_projection(reference, tol).matrix();
  return fro(x.matrix() - p * x.matrix() * p);
}

/// Decomposition result at the operator level plus its kind-shaped rendering.
struct Split {
  PsdMatrix ac, sing;
  json rendered;
  long iterations = 0;
  double method_residual = 0.0;
  bool converged = true;
};

inline Split split(const Problem& p, Method m) {
  Split s;
  switch (p.kind) {
    case ProblemKind::operator_pair: {
      auto d = decompose(p.reference, p.target, m, p.tol);
      s.rendered = {{"ac", matrix_to_json(d.ac.matrix())}, {"sing", matrix_to_json(d.sing.matrix())}};
      s.ac = std::move(d.ac);
      s.sing = std::move(d.sing);
      s.iterations = d.iterations;
      s.method_residual = d.residual;
      s.converged = d.converged;
      break;
    }
    case ProblemKind::form_pair: {
      auto d = form_decompose(p.t_form, p.w_form, m, p.tol);
      s.rendered = {{"ac", form_json(d.ac)}, {"sing", form_json(d.sing)}};
      s.ac = d.ac.gram();
      s.sing = d.sing.gram();
      s.iterations = d.iterations;
      s.method_residual = d.residual;
      s.converged = d.converged;
      break;
    }
    case ProblemKind::functional_pair: {
      auto d = functional_decompose(p.w_fun, p.v_fun, m, p.tol);
      s.rendered = {{"ac", functional_json(d.ac)}, {"sing", functional_json(d.sing)}};
      s.ac = induced_form(d.ac).gram();
      s.sing = induced_form(d.sing).gram();
      s.iterations = d.iterations;
      s.method_residual = d.residual;
      s.converged = d.converged;
      break;
    }
  }
  return s;
}

inline json run_psum(const Problem& p) {
  json result;
  PsdMatrix s;
  switch (p.kind) {
    case ProblemKind::operator_pair:
      s = parallel_sum(p.reference, p.target, p.tol);
      result = matrix_to_json(s.matrix());
      break;
    case ProblemKind::form_pair: {
      const auto f = form_parallel_sum(p.t_form, p.w_form, p.tol);
      s = f.gram();
      result = form_json(f);
      break;
    }
    case ProblemKind::functional_pair: {
      const auto f = functional_parallel_sum(p.w_fun, p.v_fun, p.tol);
      s = induced_form(f).gram();
      result = functional_json(f);
      break;
    }
  }
  const auto swapped = parallel_sum(p.target, p.reference, p.tol);
  return {{"method", "parallel_sum"},
          {"parallel_sum", std::move(result)},
          {"diagnostics",
           {{"min_eig_reference_minus_sum", min_eigenvalue(p.reference - s)},
            {"min_eig_target_minus_sum", min_eigenvalue(p.target - s)},
            {"singularity_norm", s.norm()},
            {"commutation_residual", fro(s - swapped)}}}};
}

inline json run_decompose(const Problem& p, const RunOptions& opt) {
  const Split s = split(p, opt.method);
  json diag = {
      {"sum_residual", fro(p.target.matrix() - s.ac.matrix() - s.sing.matrix())},
      {"singularity_norm", parallel_sum(p.reference, s.sing, p.tol).norm()},
      {"range_leak", range_leak(s.ac, p.reference, p.tol)},
      {"iterations", s.iterations},
      {"method_residual", s.method_residual},
      {"converged", s.converged}};
  json report = {{"method", std::string(to_string(opt.method))},
                 {"decomposition", s.rendered},
                 {"diagnostics", std::move(diag)}};

  if (opt.cross_check) {
    const Method all[] = {Method::iterate, Method::direct, Method::ando};
    std::vector<Split> runs;
    for (Method m : all) runs.push_back(m == opt.method ? s : split(p, m));
    json pairs = json::object();
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) {
        const double d = fro(runs[i].sing - runs[j].sing);
        pairs[std::string(to_string(all[i])) + "_vs_" + std::string(to_string(all[j]))] = d;
        worst = std::max(worst, d);
      }
    json converged = json::object();
    for (std::size_t i = 0; i < 3; ++i) converged[std::string(to_string(all[i]))] = runs[i].converged;
    const double threshold = 1e-6 * (1.0 + p.target.norm());
    report["cross_check"] = {{"pairwise_discrepancy", std::move(pairs)},
                             {"max_discrepancy", worst},
                             {"threshold", threshold},
                             {"agree", worst <= threshold},
                             {"converged", std::move(converged)}};
  }
  return report;
}

/// Largest residual of Bt_{n+1} = (I - Bt + Bt_n)^{-1} Bt_n^2 over n <= 10,
/// where Bt_{n+1} = Bt_n - (I - Bt):Bt_n in the auxiliary space.
inline double contraction_recursion_residual(const AuxiliarySpace& aux, const Tolerances& tol) {
  double worst = 0.0;
  PsdMatrix bn = aux.b_tilde;
  for (int n = 0; n <= 10; ++n) {
    const PsdMatrix next = PsdMatrix::hermitian_part(bn - parallel_sum(aux.a_tilde, bn, tol));
    const CMatrix lhs = aux.a_tilde.matrix() + bn.matrix();
    const CMatrix rhs = lhs.fullPivLu().solve(bn.matrix() * bn.matrix());
    worst = std::max(worst, fro(next.matrix() - rhs));
    bn = next;
  }
  return worst;
}

inline json run_check(const Problem& p) {
  const Tolerances& tol = p.tol;
  const CMatrix proj = range_projection(p.reference, tol).matrix();
  const double leak = fro(proj * p.target.matrix() * proj - p.target.matrix());
  const PsdMatrix ab = parallel_sum(p.reference, p.target, tol);
  const auto aux = auxiliary_space(p.reference, p.target, tol);
  const double aux_residual =
      aux.rank == 0 ? ab.norm() : fro(aux.lift(parallel_sum(aux.a_tilde, aux.b_tilde, tol)) - ab);
  return {{"method", "predicates"},
          {"predicates",
           {{"absolutely_continuous", is_absolutely_continuous(p.target, p.reference, tol)},
            {"singular", is_singular(p.reference, p.target, tol)}}},
          {"diagnostics",
           {{"range_leak", leak},
            {"range_leak_threshold", tol.recon_tol * (1.0 + p.target.norm())},
            {"parallel_sum_norm", ab.norm()},
            {"singularity_threshold", singularity_threshold(p.reference, p.target)},
            {"auxiliary_rank", aux.rank},
            {"auxiliary_parallel_sum_residual", aux_residual},
            {"contraction_recursion_residual",
             aux.rank == 0 ? 0.0 : contraction_recursion_residual(aux, tol)}}}};
}

/// Path of the first non-finite number in `j`, or empty.
inline std::string first_non_finite(const json& j, const std::string& path = "") {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) return path.empty() ? "/" : path;
  if (j.is_structured())
    for (const auto& [k, v] : j.items())
      if (auto p = first_non_finite(v, path + "/" + k); !p.empty()) return p;
  return {};
}

}  // namespace detail

/// Runs one command on the raw text of a problem file. Throws SchemaError /
/// InvalidInput for bad input and NumericalFailure for numerical trouble.
inline json run_command(Command cmd, const std::string& text, const RunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemFile file = parse_problem(text);
  const Problem p = validate(file, opt.flags);
  json report;
  switch (cmd) {
    case Command::psum: report = detail::run_psum(p); break;
    case Command::decompose: report = detail::run_decompose(p, opt); break;
    case Command::check: report = detail::run_check(p); break;
  }
  if (const auto where = detail::first_non_finite(report); !where.empty())
    throw NumericalFailure("non-finite value in result at " + where, INFINITY);
  report["command"] = to_string(cmd);
  report["kind"] = to_string(p.kind);
  report["input_digest"] = sha256_hex(text);
  report["tolerances"] = tolerances_to_json(p.tol);
  report["wall_time_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

enum ExitCode : int { kSuccess = 0, kSelftestFailure = 1, kInputError = 2, kNumericalFailure = 3 };

struct Outcome {
  int exit_code = kSuccess;
  json body;  ///< the report, or an error object
};

inline json error_object(const std::string& type, const std::string& message) {
  return {{"error", {{"type", type}, {"message", message}}}};
}

/// Maps exceptions to the exit-code contract.
template <class F>
Outcome guarded(F&& body) {
  try {
    return {kSuccess, body()};
  } catch (const MissingResource& e) {
    return {kInputError, error_object("missing_resource", e.what())};
  } catch (const InvalidInput& e) {
    return {kInputError, error_object("input_error", e.what())};
  } catch (const NumericalFailure& e) {
    json err = error_object("numerical_failure", e.what());
    err["error"]["residual"] = e.residual();
    return {kNumericalFailure, std::move(err)};
  } catch (const std::exception& e) {
    return {kNumericalFailure, error_object("numerical_failure", e.what())};
  }
}

inline Outcome execute(Command cmd, const std::string& text, const RunOptions& opt) {
  return guarded([&] { return run_command(cmd, text, opt); });
}

}  // namespace lebdec::cli
