// JSON problem files and matrix serialization.
//
// Complex entries are two-element arrays [re, im]; matrices are row-major
// nested arrays. Problem files carry a "version", a "kind", a kind-specific
// "payload" and optional "tolerances" overrides.
#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lebdec/lebdec.hpp"

namespace lebdec::cli {

using json = nlohmann::json;

inline constexpr const char* kFormatVersion = "1.0";

/// Malformed or schema-violating input; maps to exit code 2.
class SchemaError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Resource such as a fixture file could not be read; maps to exit code 2.
class MissingResource : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void schema(const std::string& where, const std::string& what) {
  throw SchemaError(where + ": " + what);
}

inline void require_keys(const json& obj, const std::vector<std::string>& required,
                         const std::vector<std::string>& optional, const std::string& where) {
  if (!obj.is_object()) schema(where, "expected an object");
  for (const auto& k : required)
    if (!obj.contains(k)) schema(where, "missing key '" + k + "'");
  for (const auto& [k, _] : obj.items()) {
    const bool known = std::find(required.begin(), required.end(), k) != required.end() ||
                       std::find(optional.begin(), optional.end(), k) != optional.end();
    if (!known) schema(where, "unknown key '" + k + "'");
  }
}

}  // namespace detail

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

/// Strict form accepts only [re, im]; the lenient form used by fixtures
/// also accepts a bare real number.
inline Complex complex_from_json(const json& j, const std::string& where, bool strict = true) {
  if (!strict && j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    detail::schema(where, "complex entries must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CMatrix matrix_from_json(const json& j, const std::string& where, bool strict = true) {
  if (!j.is_array()) detail::schema(where, "matrix must be an array of rows");
  const Index n = static_cast<Index>(j.size());
  CMatrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n)
      detail::schema(where, "matrix must be square");
    for (Index k = 0; k < n; ++k)
      m(i, k) = complex_from_json(row[static_cast<std::size_t>(k)], where, strict);
  }
  return m;
}

inline json vector_to_json(const CVector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

inline CVector vector_from_json(const json& j, const std::string& where, bool strict = true) {
  if (!j.is_array()) detail::schema(where, "vector must be an array");
  CVector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Index>(i)) = complex_from_json(j[i], where, strict);
  return v;
}

inline json tolerances_to_json(const Tolerances& t) {
  return {{"rank_rtol", t.rank_rtol},
          {"psd_slack", t.psd_slack},
          {"iter_tol", t.iter_tol},
          {"max_iter", t.max_iter},
          {"recon_tol", t.recon_tol}};
}

/// Partial tolerance overrides, as found in a problem file.
struct ToleranceOverrides {
  std::optional<double> rank_rtol, psd_slack, iter_tol, recon_tol;
  std::optional<long> max_iter;

  void apply(Tolerances& t) const {
    if (rank_rtol) t.rank_rtol = *rank_rtol;
    if (psd_slack) t.psd_slack = *psd_slack;
    if (iter_tol) t.iter_tol = *iter_tol;
    if (max_iter) t.max_iter = *max_iter;
    if (recon_tol) t.recon_tol = *recon_tol;
  }
};

inline ToleranceOverrides overrides_from_json(const json& j) {
  detail::require_keys(j, {}, {"rank_rtol", "psd_slack", "iter_tol", "max_iter", "recon_tol"},
                       "tolerances");
  ToleranceOverrides o;
  auto number = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number()) detail::schema("tolerances", std::string(key) + " must be a number");
    return j[key].get<double>();
  };
  o.rank_rtol = number("rank_rtol");
  o.psd_slack = number("psd_slack");
  o.iter_tol = number("iter_tol");
  o.recon_tol = number("recon_tol");
  if (j.contains("max_iter")) {
    if (!j["max_iter"].is_number_integer()) detail::schema("tolerances", "max_iter must be an integer");
    o.max_iter = j["max_iter"].get<long>();
  }
  return o;
}

inline json overrides_to_json(const ToleranceOverrides& o) {
  json j = json::object();
  if (o.rank_rtol) j["rank_rtol"] = *o.rank_rtol;
  if (o.psd_slack) j["psd_slack"] = *o.psd_slack;
  if (o.iter_tol) j["iter_tol"] = *o.iter_tol;
  if (o.max_iter) j["max_iter"] = *o.max_iter;
  if (o.recon_tol) j["recon_tol"] = *o.recon_tol;
  return j;
}

enum class ProblemKind { operator_pair, form_pair, functional_pair };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::operator_pair: return "operator_pair";
    case ProblemKind::form_pair: return "form_pair";
    case ProblemKind::functional_pair: return "functional_pair";
  }
  return "unknown";
}

/// Raw problem data exactly as read; positivity is checked later by
/// `validate`, so a file can be parsed and re-serialized unchanged.
///
/// Roles: operator_pair decomposes B with respect to A; form_pair decomposes
/// t with respect to w; functional_pair decomposes w with respect to v.
struct ProblemFile {
  std::string version = kFormatVersion;
  ProblemKind kind = ProblemKind::operator_pair;
  CMatrix a, b;                        // operator_pair
  std::vector<std::string> basis;      // form_pair
  CMatrix t, w;                        // form_pair
  std::vector<Index> blocks;           // functional_pair
  std::vector<CMatrix> w_rho, v_rho;   // functional_pair
  std::optional<ToleranceOverrides> tolerances;
};

namespace detail {

inline std::vector<CMatrix> densities_from_json(const json& j, const std::vector<Index>& blocks,
                                                const std::string& where) {
  if (!j.is_array() || j.size() != blocks.size())
    schema(where, "expected one density per block");
  std::vector<CMatrix> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(matrix_from_json(j[i], where));
    if (out.back().rows() != blocks[i]) schema(where, "density shape does not match its block");
  }
  return out;
}

inline json densities_to_json(const std::vector<CMatrix>& rho) {
  json out = json::array();
  for (const auto& m : rho) out.push_back(matrix_to_json(m));
  return out;
}

}  // namespace detail

inline ProblemFile problem_from_json(const json& j) {
  detail::require_keys(j, {"version", "kind", "payload"}, {"tolerances"}, "problem");
  ProblemFile p;
  if (!j["version"].is_string() || j["version"].get<std::string>() != kFormatVersion)
    detail::schema("problem", "unsupported version (expected \"" + std::string(kFormatVersion) + "\")");
  p.version = j["version"].get<std::string>();
  if (!j["kind"].is_string()) detail::schema("problem", "kind must be a string");
  const std::string kind = j["kind"].get<std::string>();
  const json& pl = j["payload"];

  if (kind == "operator_pair") {
    p.kind = ProblemKind::operator_pair;
    detail::require_keys(pl, {"A", "B"}, {}, "payload");
    p.a = matrix_from_json(pl["A"], "payload.A");
    p.b = matrix_from_json(pl["B"], "payload.B");
    if (p.a.rows() != p.b.rows()) detail::schema("payload", "A and B differ in dimension");
  } else if (kind == "form_pair") {
    p.kind = ProblemKind::form_pair;
    detail::require_keys(pl, {"basis", "t", "w"}, {}, "payload");
    if (!pl["basis"].is_array()) detail::schema("payload.basis", "expected an array of labels");
    for (const auto& l : pl["basis"]) {
      if (!l.is_string()) detail::schema("payload.basis", "labels must be strings");
      p.basis.push_back(l.get<std::string>());
    }
    p.t = matrix_from_json(pl["t"], "payload.t");
    p.w = matrix_from_json(pl["w"], "payload.w");
    if (p.t.rows() != static_cast<Index>(p.basis.size()) ||
        p.w.rows() != static_cast<Index>(p.basis.size()))
      detail::schema("payload", "Gram matrices must match the basis size");
  } else if (kind == "functional_pair") {
    p.kind = ProblemKind::functional_pair;
    detail::require_keys(pl, {"blocks", "w", "v"}, {}, "payload");
    if (!pl["blocks"].is_array() || pl["blocks"].empty())
      detail::schema("payload.blocks", "expected a nonempty array of block sizes");
    for (const auto& d : pl["blocks"]) {
      if (!d.is_number_integer() || d.get<long>() < 1)
        detail::schema("payload.blocks", "block sizes must be positive integers");
      p.blocks.push_back(d.get<Index>());
    }
    p.w_rho = detail::densities_from_json(pl["w"], p.blocks, "payload.w");
    p.v_rho = detail::densities_from_json(pl["v"], p.blocks, "payload.v");
  } else {
    detail::schema("problem", "unknown kind '" + kind + "'");
  }
  if (j.contains("tolerances")) p.tolerances = overrides_from_json(j["tolerances"]);
  return p;
}

inline json serialize(const ProblemFile& p) {
  json pl;
  switch (p.kind) {
    case ProblemKind::operator_pair:
      pl = {{"A", matrix_to_json(p.a)}, {"B", matrix_to_json(p.b)}};
      break;
    case ProblemKind::form_pair:
      pl = {{"basis", p.basis}, {"t", matrix_to_json(p.t)}, {"w", matrix_to_json(p.w)}};
      break;
    case ProblemKind::functional_pair:
      pl = {{"blocks", p.blocks},
            {"w", detail::densities_to_json(p.w_rho)},
            {"v", detail::densities_to_json(p.v_rho)}};
      break;
  }
  json j = {{"version", p.version}, {"kind", to_string(p.kind)}, {"payload", std::move(pl)}};
  if (p.tolerances) j["tolerances"] = overrides_to_json(*p.tolerances);
  return j;
}

inline json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(where + ": malformed JSON (" + e.what() + ")");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingResource("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ProblemFile parse_problem(const std::string& text) {
  return problem_from_json(parse_json_text(text, "problem"));
}

}  // namespace lebdec::cli
