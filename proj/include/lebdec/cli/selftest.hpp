// Bundled fixture suite.
//
// A fixture file is {"version": "1.0", "fixtures": [...]}. Each fixture has a
// "name", an "op", "args" and "expect", plus optional "tol" (default 1e-9),
// "tolerances" and a "table" tag. Fixture tolerances are pinned: they win over
// command-line overrides. Matrices inside op fixtures may
// use bare reals as entries; embedded problem files follow the strict format.
//
// Comparisons for the iterate and ando methods use
// max(tol, iter_tol * (1 + tr B)), since their stopping rules only bound the
// last step.
#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lebdec/cli/commands.hpp"
#include "lebdec/random.hpp"

namespace lebdec::cli {

struct FixtureResult {
  std::string name;
  std::string op;
  bool passed = false;
  std::string detail;
};

namespace selftest_detail {

class Mismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& what) { throw Mismatch(what); }

inline std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

struct Context {
  const json& args;
  const json& expect;
  double tol;
  Tolerances tols;

  CMatrix mat(const char* key) const { return matrix_from_json(at(key), key, false); }
  PsdMatrix psd(const char* key) const { return PsdMatrix::checked(mat(key), tols); }
  const json& at(const char* key) const {
    if (!args.contains(key)) throw SchemaError(std::string("fixture args: missing '") + key + "'");
    return args[key];
  }
  Method method() const {
    return args.contains("method") ? method_from_string(args["method"].get<std::string>())
                                   : Method::direct;
  }
  double tol_for(Method m, const PsdMatrix& target, double base) const {
    return m == Method::direct ? base : std::max(base, tols.iter_tol * (1.0 + target.trace()));
  }
  double tol_for(Method m, const PsdMatrix& target) const { return tol_for(m, target, tol); }

  void matrix(const char* key, const CMatrix& got, double t) const {
    if (!expect.contains(key)) return;
    const CMatrix want = matrix_from_json(expect[key], key, false);
    if (want.rows() != got.rows()) fail(std::string(key) + ": dimension mismatch");
    const double err = (got - want).norm();
    if (!(err <= t)) fail(std::string(key) + ": error " + num(err) + " > " + num(t));
  }
  void matrix(const char* key, const CMatrix& got) const { matrix(key, got, tol); }
  void scalar(const char* key, double got) const {
    if (!expect.contains(key)) return;
    const double want = expect[key].get<double>();
    if (!(std::abs(got - want) <= tol))
      fail(std::string(key) + ": got " + num(got) + ", want " + num(want));
  }
  void exact(const char* key, const json& got) const {
    if (expect.contains(key) && expect[key] != got)
      fail(std::string(key) + ": got " + got.dump() + ", want " + expect[key].dump());
  }
  void bound(const char* what, double value, double limit) const {
    if (!(value <= limit)) fail(std::string(what) + ": " + num(value) + " > " + num(limit));
  }
};

/// dim(ran A) + dim(ran B) - dim(ran A + ran B), from orthonormal range bases.
inline Index range_intersection_dim(const PsdMatrix& a, const PsdMatrix& b, const Tolerances& tol) {
  auto basis = [&](const PsdMatrix& m) {
    const auto e = eig_hermitian(m, tol);
    return CMatrix(e.vectors.leftCols(e.rank(tol.rank_rtol)));
  };
  const CMatrix ua = basis(a), ub = basis(b);
  CMatrix stacked(a.dim(), ua.cols() + ub.cols());
  stacked << ua, ub;
  if (stacked.cols() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(stacked);
  const RVector sv = svd.singularValues();
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-8) ++r;
  return ua.cols() + ub.cols() - r;
}

inline StarAlgebra algebra_of(const Context& c) {
  std::vector<Index> dims;
  for (const auto& d : c.at("blocks")) dims.push_back(d.get<Index>());
  return StarAlgebra(dims);
}

inline Functional functional_of(const Context& c, const StarAlgebra& alg, const char* key) {
  std::vector<CMatrix> rho;
  for (const auto& m : c.at(key)) rho.push_back(matrix_from_json(m, key, false));
  return Functional::checked(alg, rho, c.tols);
}

inline void densities(const Context& c, const char* key, const Functional& got, double t) {
  if (!c.expect.contains(key)) return;
  const auto& want = c.expect[key];
  if (want.size() != got.densities.size()) fail(std::string(key) + ": block count mismatch");
  for (std::size_t i = 0; i < want.size(); ++i) {
    const CMatrix w = matrix_from_json(want[i], key, false);
    const double err = (got.densities[i].matrix() - w).norm();
    if (!(err <= t))
      fail(std::string(key) + "[" + std::to_string(i) + "]: error " + num(err) + " > " + num(t));
  }
}

inline SesquilinearForm form_of(const Context& c, const char* key) {
  const CMatrix g = c.mat(key);
  std::vector<std::string> labels = SesquilinearForm::default_labels(g.rows());
  if (c.args.contains("basis")) labels = c.args["basis"].get<std::vector<std::string>>();
  return SesquilinearForm::checked(labels, g, c.tols);
}

/// Polarization of the variational infimum, an independent route to A:B.
inline CMatrix polarized_parallel_sum(const PsdMatrix& a, const PsdMatrix& b,
                                      const Tolerances& tol) {
  const Index n = a.dim();
  CMatrix m(n, n);
  const Complex unit[4] = {1.0, {0, 1}, -1.0, {0, -1}};
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Complex s = 0;
      for (const Complex& u : unit) {
        CVector x = CVector::Zero(n);
        x(i) += 1.0;
        x(j) += u;
        s += u * variational_value(a, b, x, tol);
      }
      m(j, i) = s / 4.0;
    }
  return m;
}

/// Deep comparison for command reports. Numbers compare within `tol`;
/// {"at_most": x} and {"at_least": x} give one-sided bounds.
inline void compare_json(const json& got, const json& want, double tol, double bound_floor,
                         const std::string& where) {
  if (want.is_object() && (want.contains("at_most") || want.contains("at_least"))) {
    if (!got.is_number()) fail(where + ": expected a number");
    const double g = got.get<double>();
    if (want.contains("at_most") && !(g <= std::max(want["at_most"].get<double>(), bound_floor)))
      fail(where + ": " + num(g) + " exceeds " + num(want["at_most"].get<double>()));
    if (want.contains("at_least") && !(g >= want["at_least"].get<double>()))
      fail(where + ": " + num(g) + " below " + num(want["at_least"].get<double>()));
    return;
  }
  if (want.is_number() && !want.is_boolean()) {
    if (!got.is_number()) fail(where + ": expected a number, got " + got.dump());
    const double err = std::abs(got.get<double>() - want.get<double>());
    if (!(err <= tol)) fail(where + ": got " + got.dump() + ", want " + want.dump());
    return;
  }
  if (want.is_array()) {
    if (!got.is_array() || got.size() != want.size()) fail(where + ": array shape mismatch");
    for (std::size_t i = 0; i < want.size(); ++i)
      compare_json(got[i], want[i], tol, bound_floor, where + "/" + std::to_string(i));
    return;
  }
  if (want.is_object()) {
    for (const auto& [k, v] : want.items()) {
      if (!got.contains(k)) fail(where + ": missing '" + k + "'");
      compare_json(got[k], v, tol, bound_floor, where + "/" + k);
    }
    return;
  }
  if (got != want) fail(where + ": got " + got.dump() + ", want " + want.dump());
}

inline void run_command_fixture(const Context& c, const ToleranceOverrides& flags) {
  RunOptions opt;
  opt.flags = flags;
  const std::string name = c.at("command").get<std::string>();
  Command cmd;
  if (name == "psum") cmd = Command::psum;
  else if (name == "decompose") cmd = Command::decompose;
  else if (name == "check") cmd = Command::check;
  else throw SchemaError("fixture: unknown command '" + name + "'");
  if (c.args.contains("method")) opt.method = method_from_string(c.args["method"].get<std::string>());
  opt.cross_check = c.args.value("cross_check", false);

  const std::string text =
      c.args.contains("problem_text") ? c.args["problem_text"].get<std::string>() : c.at("problem").dump();
  const Outcome out = execute(cmd, text, opt);
  const int want_exit = c.expect.value("exit", 0);
  if (out.exit_code != want_exit)
    fail("exit code " + std::to_string(out.exit_code) + ", want " + std::to_string(want_exit) +
         ": " + out.body.dump());
  if (!c.expect.contains("report")) return;

  double tol = c.tol, floor = 0.0;
  const bool iterative = opt.cross_check || opt.method != Method::direct;
  if (iterative && c.args.contains("problem")) {
    const Problem p = validate(problem_from_json(c.args["problem"]), flags);
    floor = p.tol.iter_tol * (1.0 + p.target.trace());
    tol = std::max(tol, floor);
  }
  compare_json(out.body, c.expect["report"], tol, floor, "report");
}

using OpFn = std::function<void(const Context&)>;

inline const std::map<std::string, OpFn>& ops() {
  static const std::map<std::string, OpFn> table = {
      {"eig_hermitian",
       [](const Context& c) {
         const auto m = c.psd("M");
         const auto e = eig_hermitian(m, c.tols);
         const Index n = m.dim();
         c.bound("unitarity", (e.vectors.adjoint() * e.vectors - CMatrix::Identity(n, n)).norm(), c.tol);
         c.bound("reconstruction", (e.apply([](double t) { return t; }) - m.matrix()).norm(), c.tol);
         if (c.expect.contains("values")) {
           const auto want = c.expect["values"].get<std::vector<double>>();
           if (static_cast<Index>(want.size()) != n) fail("values: count mismatch");
           for (Index i = 0; i < n; ++i)
             if (!(std::abs(e.values(i) - want[i]) <= c.tol))
               fail("values[" + std::to_string(i) + "]: got " + num(e.values(i)));
         }
         if (c.expect.contains("projectors")) {
           const auto& ps = c.expect["projectors"];
           for (std::size_t i = 0; i < ps.size(); ++i) {
             const CVector v = e.vectors.col(static_cast<Index>(i));
             const CMatrix want = matrix_from_json(ps[i], "projectors", false);
             if (!((v * v.adjoint() - want).norm() <= c.tol))
               fail("projector " + std::to_string(i) + " mismatch");
           }
         }
       }},
      {"pinv", [](const Context& c) { c.matrix("result", pinv(c.psd("M"), c.tols).matrix()); }},
      {"range_projection",
       [](const Context& c) { c.matrix("result", range_projection(c.psd("M"), c.tols).matrix()); }},
      {"loewner_leq",
       [](const Context& c) { c.exact("result", loewner_leq(c.psd("A"), c.psd("B"), c.tols)); }},
      {"parallel_sum",
       [](const Context& c) {
         const auto a = c.psd("A"), b = c.psd("B");
         c.matrix("result", parallel_sum(a, b, c.tols).matrix());
         if (c.expect.contains("variational_oracle"))
           c.matrix("variational_oracle", polarized_parallel_sum(a, b, c.tols),
                    c.args.value("oracle_tol", 1e-7));
       }},
      {"scalar_parallel_sum",
       [](const Context& c) {
         RVector a(1), b(1);
         a << c.at("a").get<double>();
         b << c.at("b").get<double>();
         c.scalar("result", parallel_sum(PsdMatrix::diagonal(a), PsdMatrix::diagonal(b), c.tols)(0, 0).real());
       }},
      {"variational_value",
       [](const Context& c) {
         const CVector x = vector_from_json(c.at("x"), "x", false);
         c.scalar("result", variational_value(c.psd("A"), c.psd("B"), x, c.tols));
       }},
      {"ando_ac_part",
       [](const Context& c) {
         const auto b = c.psd("B");
         const auto r = ando_ac_part(c.psd("A"), b, c.tols);
         if (!r.converged) fail("did not converge");
         c.matrix("result", r.ac_part.matrix(), c.tol_for(Method::ando, b));
       }},
      {"spectral_ac_of_contraction",
       [](const Context& c) {
         c.matrix("result", spectral_ac_of_contraction(c.psd("Bt"), c.tols).matrix());
       }},
      {"mu_A",
       [](const Context& c) {
         PsdMatrix x = c.psd("X");
         const auto a = c.psd("A");
         const auto& seq = c.expect.at("sequence");
         for (std::size_t k = 0; k < seq.size(); ++k) {
           x = mu_A(x, a, c.tols);
           const CMatrix want = matrix_from_json(seq[k], "sequence", false);
           if (!((x.matrix() - want).norm() <= c.tol))
             fail("step " + std::to_string(k + 1) + " mismatch");
         }
       }},
      {"decompose",
       [](const Context& c) {
         const auto a = c.psd("A"), b = c.psd("B");
         const Method m = c.method();
         const auto d = decompose(a, b, m, c.tols);
         if (!d.converged) fail("did not converge");
         c.matrix("ac", d.ac.matrix(), c.tol_for(m, b));
         c.matrix("sing", d.sing.matrix(), c.tol_for(m, b));
       }},
      {"auxiliary_space",
       [](const Context& c) {
         const auto a = c.psd("A"), b = c.psd("B");
         const auto aux = auxiliary_space(a, b, c.tols);
         c.exact("rank", aux.rank);
         c.bound("lift of a_tilde", (aux.lift(aux.a_tilde).matrix() - a.matrix()).norm(), c.tol);
         c.bound("lift of b_tilde", (aux.lift(aux.b_tilde).matrix() - b.matrix()).norm(), c.tol);
         c.matrix("a_tilde", aux.a_tilde.matrix());
         c.matrix("b_tilde", aux.b_tilde.matrix());
         if (c.expect.contains("a_tilde_eigenvalues")) {
           const auto want = c.expect["a_tilde_eigenvalues"].get<std::vector<double>>();
           const auto e = eig_hermitian(aux.a_tilde, c.tols);
           if (static_cast<Index>(want.size()) != e.values.size()) fail("a_tilde: size mismatch");
           for (std::size_t i = 0; i < want.size(); ++i)
             if (!(std::abs(e.values(static_cast<Index>(i)) - want[i]) <= c.tol))
               fail("a_tilde eigenvalue " + std::to_string(i) + " mismatch");
         }
       }},
      {"range_intersection_dim",
       [](const Context& c) {
         c.exact("result", range_intersection_dim(c.psd("A"), c.psd("B"), c.tols));
       }},
      {"is_absolutely_continuous",
       [](const Context& c) {
         c.exact("result", is_absolutely_continuous(c.psd("B"), c.psd("A"), c.tols));
       }},
      {"is_singular",
       [](const Context& c) { c.exact("result", is_singular(c.psd("A"), c.psd("B"), c.tols)); }},
      {"cross_method_random",
       [](const Context& c) {
         lebdec::random::Engine rng(c.at("seed").get<std::uint64_t>());
         const int trials = c.args.value("trials", 10);
         const Index max_dim = c.args.value("max_dim", 6);
         const auto names = c.at("methods").get<std::vector<std::string>>();
         const Method m1 = method_from_string(names.at(0)), m2 = method_from_string(names.at(1));
         for (int k = 0; k < trials; ++k) {
           const Index n = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(max_dim));
           const auto a = lebdec::random::psd(n, static_cast<Index>(rng() % (n + 1)), rng);
           const auto b = lebdec::random::psd(n, static_cast<Index>(rng() % (n + 1)), rng);
           const auto d1 = decompose(a, b, m1, c.tols), d2 = decompose(a, b, m2, c.tols);
           const Method loose = m1 == Method::direct ? m2 : m1;
           c.bound("sing discrepancy", (d1.sing - d2.sing).norm(),
                   c.tol_for(loose, b, c.tol * (1.0 + b.norm())));
         }
       }},
      {"induced_operator",
       [](const Context& c) { c.matrix("result", induced_operator(form_of(c, "gram")).matrix()); }},
      {"form_parallel_sum",
       [](const Context& c) {
         c.matrix("result", form_parallel_sum(form_of(c, "t"), form_of(c, "w"), c.tols).gram().matrix());
       }},
      {"form_parallel_sum_variational_random",
       [](const Context& c) {
         lebdec::random::Engine rng(c.at("seed").get<std::uint64_t>());
         const Index n = c.at("dim").get<Index>();
         const auto t = SesquilinearForm(SesquilinearForm::default_labels(n), lebdec::random::psd(n, n - 1, rng));
         const auto w = SesquilinearForm(SesquilinearForm::default_labels(n), lebdec::random::psd(n, n, rng));
         const auto tw = form_parallel_sum(t, w, c.tols);
         for (int k = 0; k < c.args.value("samples", 10); ++k) {
           const CVector x = lebdec::random::vector(n, rng);
           const double q = tw.quadratic(x);
           c.bound("variational gap", std::abs(q - variational_value(t.gram(), w.gram(), x, c.tols)),
                   c.tol * (1.0 + q));
         }
       }},
      {"form_decompose",
       [](const Context& c) {
         const auto t = form_of(c, "t");
         const Method m = c.method();
         const auto d = form_decompose(t, form_of(c, "w"), m, c.tols);
         c.matrix("ac", d.ac.gram().matrix(), c.tol_for(m, t.gram()));
         c.matrix("sing", d.sing.gram().matrix(), c.tol_for(m, t.gram()));
       }},
      {"eval",
       [](const Context& c) {
         const auto alg = algebra_of(c);
         const auto w = functional_of(c, alg, "w");
         AlgebraElement a = AlgebraElement::unit(alg);
         if (c.at("a") != "unit") {
           a.blocks.clear();
           for (const auto& m : c.at("a")) a.blocks.push_back(matrix_from_json(m, "a", false));
         }
         const Complex z = eval(w, a);
         const Complex want = complex_from_json(c.expect.at("result"), "result", false);
         if (!(std::abs(z - want) <= c.tol)) fail("eval mismatch");
       }},
      {"induced_form",
       [](const Context& c) {
         const auto alg = algebra_of(c);
         const auto t = induced_form(functional_of(c, alg, "w"));
         c.matrix("gram", t.gram().matrix());
         c.exact("rank", eig_hermitian(t.gram(), c.tols).rank(c.tols.rank_rtol));
       }},
      {"gns",
       [](const Context& c) {
         const auto alg = algebra_of(c);
         const auto w = functional_of(c, alg, "w");
         const auto g = gns(w, c.tols);
         c.exact("space_dim", g.space_dim());
         c.scalar("cyclic_norm", g.cyclic_vector().norm());
         const CVector& z = g.cyclic_vector();
         for (Index p = 0; p < alg.total_dim(); ++p) {
           const auto e = AlgebraElement::matrix_unit(alg, p);
           c.bound("reconstruction", std::abs(eval(w, e) - z.dot(g.rep(e) * z)), c.tol);
           c.bound("adjoint", (g.rep(e.adjoint()) - g.rep(e).adjoint()).norm(), c.tol);
           for (Index q = 0; q < alg.total_dim(); ++q) {
             const auto f = AlgebraElement::matrix_unit(alg, q);
             c.bound("multiplicativity", (g.rep(e * f) - g.rep(e) * g.rep(f)).norm(), c.tol);
           }
         }
         // a *-representation of M_n on C^n is unitarily equivalent to the identity one
         if (c.expect.value("identity_representation", false)) {
           if (alg.num_blocks() != 1 || g.space_dim() != alg.block_dims()[0])
             fail("not an n-dimensional representation of M_n");
           c.bound("unit", (g.rep(AlgebraElement::unit(alg)) -
                            CMatrix::Identity(g.space_dim(), g.space_dim())).norm(), c.tol);
         }
       }},
      {"functional_parallel_sum",
       [](const Context& c) {
         const auto alg = algebra_of(c);
         const auto s = functional_parallel_sum(functional_of(c, alg, "w"),
                                                functional_of(c, alg, "v"), c.tols);
         densities(c, "densities", s, c.tol);
       }},
      {"functional_decompose",
       [](const Context& c) {
         const auto alg = algebra_of(c);
         const auto w = functional_of(c, alg, "w");
         const Method m = c.method();
         const auto d = functional_decompose(w, functional_of(c, alg, "v"), m, c.tols);
         const double t = c.tol_for(m, induced_form(w).gram());
         densities(c, "ac", d.ac, t);
         densities(c, "sing", d.sing, t);
       }},
  };
  return table;
}

}  // namespace selftest_detail

inline FixtureResult run_fixture(const json& fx, const ToleranceOverrides& flags) {
  using namespace selftest_detail;
  FixtureResult r;
  r.name = fx.value("name", std::string("<unnamed>"));
  r.op = fx.value("op", std::string());
  const json empty = json::object();
  const json& args = fx.contains("args") ? fx["args"] : empty;
  const json& expect = fx.contains("expect") ? fx["expect"] : empty;
  Tolerances tols;
  flags.apply(tols);
  if (fx.contains("tolerances")) overrides_from_json(fx["tolerances"]).apply(tols);
  const Context ctx{args, expect, fx.value("tol", 1e-9), tols};
  const std::string throws = expect.value("throws", std::string());
  try {
    if (r.op == "command") {
      run_command_fixture(ctx, flags);
    } else {
      const auto it = ops().find(r.op);
      if (it == ops().end()) throw SchemaError("unknown fixture op '" + r.op + "'");
      it->second(ctx);
    }
    if (!throws.empty()) fail("expected " + throws + " to be thrown");
    r.passed = true;
  } catch (const Mismatch& e) {
    r.detail = e.what();
  } catch (const InvalidInput& e) {
    r.passed = throws == "InvalidInput";
    if (!r.passed) r.detail = std::string("InvalidInput: ") + e.what();
  } catch (const NumericalFailure& e) {
    r.passed = throws == "NumericalFailure";
    if (!r.passed) r.detail = std::string("NumericalFailure: ") + e.what();
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

/// Reads and checks the fixture file. Throws MissingResource if it cannot be
/// opened and SchemaError if it is malformed.
inline json load_fixtures(const std::string& path, std::string* raw = nullptr) {
  const std::string text = read_file(path);
  if (raw) *raw = text;
  json j = parse_json_text(text, "fixtures");
  if (!j.is_object() || !j.contains("fixtures") || !j["fixtures"].is_array())
    throw SchemaError("fixtures: expected an object with a 'fixtures' array");
  if (j.value("version", std::string()) != kFormatVersion)
    throw SchemaError("fixtures: unsupported version");
  return j;
}

struct SelftestSummary {
  std::vector<FixtureResult> results;
  std::size_t failed = 0;
  json report;
};

/// Runs every fixture, or only those whose "table" tag equals `table`.
inline SelftestSummary run_selftest(const std::string& path, const ToleranceOverrides& flags,
                                    const std::string& table = {}) {
  const auto start = std::chrono::steady_clock::now();
  std::string raw;
  const json file = load_fixtures(path, &raw);
  SelftestSummary s;
  json results = json::array(), failures = json::array();
  for (const auto& fx : file["fixtures"]) {
    if (!table.empty() && fx.value("table", std::string()) != table) continue;
    auto r = run_fixture(fx, flags);
    json entry = {{"name", r.name}, {"op", r.op}, {"passed", r.passed}};
    if (!r.passed) {
      ++s.failed;
      entry["detail"] = r.detail;
      failures.push_back(r.name);
    }
    results.push_back(std::move(entry));
    s.results.push_back(std::move(r));
  }
  Tolerances tols;
  flags.apply(tols);
  s.report = {{"command", "selftest"},
              {"fixtures_digest", sha256_hex(raw)},
              {"total", s.results.size()},
              {"passed", s.results.size() - s.failed},
              {"failed", s.failed},
              {"failures", std::move(failures)},
              {"results", std::move(results)},
              {"tolerances", tolerances_to_json(tols)},
              {"wall_time_ms", std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - start).count()}};
  return s;
}

}  // namespace lebdec::cli
