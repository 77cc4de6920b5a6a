// lebdec: parallel sums and Lebesgue decompositions of PSD problems from JSON files.
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lebdec/cli/commands.hpp"
#include "lebdec/cli/selftest.hpp"

namespace {

using lebdec::cli::json;

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return lebdec::cli::read_file(path);
}

void print_scalars(std::ostream& os, const json& obj, const std::string& indent) {
  for (const auto& [k, v] : obj.items()) {
    if (v.is_object()) {
      os << indent << k << ":\n";
      print_scalars(os, v, indent + "  ");
    } else if (v.is_primitive()) {
      os << indent << k << " = " << v.dump() << "\n";
    }
  }
}

std::string summary_text(const json& r) {
  std::ostringstream os;
  if (r.contains("error")) {
    os << "error (" << r["error"]["type"].get<std::string>()
       << "): " << r["error"]["message"].get<std::string>() << "\n";
    return os.str();
  }
  if (r["command"] == "selftest") {
    os << "selftest: " << r["passed"] << "/" << r["total"] << " fixtures passed\n";
    for (const auto& name : r["failures"]) os << "  FAILED " << name.get<std::string>() << "\n";
    return os.str();
  }
  os << r["command"].get<std::string>() << " (" << r["kind"].get<std::string>()
     << ", method " << r["method"].get<std::string>() << ")\n";
  os << "input sha256 " << r["input_digest"].get<std::string>() << "\n";
  for (const char* section : {"predicates", "diagnostics", "cross_check"})
    if (r.contains(section)) {
      os << section << ":\n";
      print_scalars(os, r[section], "  ");
    }
  os << "use --json or --output for the full report\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace lebdec::cli;

  CLI::App app{"Parallel sums and Lebesgue decompositions of PSD matrices, forms and functionals"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<double> tol_rank, iter_tol;
  std::optional<long> max_iter;
  std::string output;
  bool as_json = false;
  app.add_option("--tol-rank", tol_rank, "relative eigenvalue cutoff for rank decisions");
  app.add_option("--iter-tol", iter_tol, "stopping tolerance of the monotone iterations");
  app.add_option("--max-iter", max_iter, "iteration cap of the iterate method");
  app.add_option("--output", output, "also write the JSON report to this path");
  app.add_flag("--json", as_json, "print the full JSON report on stdout");

  std::string input;
  std::string method = "direct";
  bool cross_check = false;
  std::string fixtures = LEBDEC_DEFAULT_FIXTURES;

  auto* psum = app.add_subcommand("psum", "parallel sum of the pair");
  psum->add_option("file", input, "problem file, or - for stdin")->required();
  auto* dec = app.add_subcommand("decompose", "Lebesgue decomposition of the target");
  dec->add_option("file", input, "problem file, or - for stdin")->required();
  dec->add_option("--method", method, "iterate, direct or ando")
      ->check(CLI::IsMember({"iterate", "direct", "ando"}));
  dec->add_flag("--cross-check", cross_check, "run all three methods and report discrepancies");
  auto* check = app.add_subcommand("check", "absolute continuity and singularity predicates");
  check->add_option("file", input, "problem file, or - for stdin")->required();
  auto* self = app.add_subcommand("selftest", "run the bundled fixture suite");
  self->add_option("--fixtures", fixtures, "fixture file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << error_object("usage_error", e.what()).dump(2) << "\n";
    return kInputError;
  }

  ToleranceOverrides flags;
  flags.rank_rtol = tol_rank;
  flags.iter_tol = iter_tol;
  flags.max_iter = max_iter;

  Outcome out;
  if (self->parsed()) {
    out = guarded([&] {
      lebdec::Tolerances check_flags;
      flags.apply(check_flags);
      check_flags.validate();
      return run_selftest(fixtures, flags).report;
    });
    if (out.exit_code == kSuccess && out.body["failed"].get<std::size_t>() > 0)
      out.exit_code = kSelftestFailure;
  } else {
    RunOptions opt;
    opt.flags = flags;
    opt.method = lebdec::method_from_string(method);
    opt.cross_check = cross_check;
    const Command cmd = psum->parsed() ? Command::psum
                        : dec->parsed() ? Command::decompose
                                        : Command::check;
    out = guarded([&] { return run_command(cmd, read_input(input), opt); });
  }

  if (!output.empty() && !out.body.contains("error")) {
    std::ofstream f(output);
    if (!(f << out.body.dump(2) << "\n")) {
      std::cout << error_object("output_error", "cannot write '" + output + "'").dump(2) << "\n";
      return kInputError;
    }
  }
  if (as_json || out.body.contains("error"))
    std::cout << out.body.dump(2) << "\n";
  else
    std::cout << summary_text(out.body);
  return out.exit_code;
}
