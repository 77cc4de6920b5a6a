// Runs the lebdec executable and checks exit codes, report contents and determinism.
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "lebdec/cli/json_io.hpp"
#include "lebdec/cli/commands.hpp"

namespace fs = std::filesystem;
using lebdec::cli::json;

namespace {

struct ToolRun {
  int exit_code = -1;
  std::string out;
};

ToolRun run(const std::string& args, const std::string& stdin_file = "") {
  std::string cmd = std::string("'") + LEBDEC_TOOL + "' " + args + " 2>/dev/null";
  if (!stdin_file.empty()) cmd += " < '" + stdin_file + "'";
  ToolRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string sample(const std::string& name) {
  return std::string(LEBDEC_SAMPLES) + "/" + name + ".json";
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("lebdec_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

json strip_time(json j) {
  j.erase("wall_time_ms");
  return j;
}

const char* kSamples[] = {"diagonal_pair", "identity_pair", "skew_ranges",
                          "complex_pair",  "form_pair",     "functional_pair"};

}  // namespace

TEST(CliExitCodes, SelftestPasses) {
  const ToolRun r = run("selftest");
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("fixtures passed"), std::string::npos);
}

TEST(CliExitCodes, SelftestPassesUnderLooseIterationTolerance) {
  const ToolRun r = run("--iter-tol 1e-2 selftest --json");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json report = json::parse(r.out);
  EXPECT_EQ(report["failed"], 0);
  EXPECT_EQ(report["tolerances"]["iter_tol"], 1e-2);
}

TEST(CliExitCodes, SelftestFailureListsFixture) {
  TempDir tmp;
  json fx = json::parse(lebdec::cli::read_file(LEBDEC_DEFAULT_FIXTURES));
  json& first = fx["fixtures"][0];
  first["name"] = "deliberately-broken";
  first["op"] = "scalar_parallel_sum";
  first["args"] = {{"a", 1.0}, {"b", 1.0}};
  first["expect"] = {{"result", 0.75}};
  const ToolRun r = run("selftest --fixtures '" + tmp.file("broken.json", fx.dump()) + "'");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("deliberately-broken"), std::string::npos);
}

TEST(CliExitCodes, MissingFixtureFile) {
  TempDir tmp;
  const ToolRun r = run("selftest --fixtures '" + tmp.path("absent.json") + "'");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_EQ(json::parse(r.out)["error"]["type"], "missing_resource");
}

TEST(CliExitCodes, MalformedJson) {
  TempDir tmp;
  const ToolRun r = run("psum '" + tmp.file("bad.json", "{\"version\": \"1.0\", ") + "'");
  EXPECT_EQ(r.exit_code, 2);
  const json err = json::parse(r.out);
  EXPECT_EQ(err["error"]["type"], "input_error");
}

TEST(CliExitCodes, SchemaViolations) {
  TempDir tmp;
  json ok = json::parse(lebdec::cli::read_file(sample("diagonal_pair")));
  json unknown_key = ok;
  unknown_key["payload"]["C"] = ok["payload"]["A"];
  json bad_version = ok;
  bad_version["version"] = "2.0";
  json bad_tolerance = ok;
  bad_tolerance["tolerances"] = {{"rank_tol", 1e-8}};
  json bare_reals = ok;
  bare_reals["payload"]["A"] = {{2.0, 0.0}, {0.0, 0.0}};
  json not_psd = ok;
  not_psd["payload"]["B"][1][1] = {-5.0, 0.0};
  int i = 0;
  for (const json& j : {unknown_key, bad_version, bad_tolerance, bare_reals, not_psd}) {
    const ToolRun r = run("decompose '" + tmp.file("case" + std::to_string(i++) + ".json", j.dump()) + "'");
    EXPECT_EQ(r.exit_code, 2) << j.dump();
    EXPECT_TRUE(json::parse(r.out).contains("error"));
  }
}

TEST(CliExitCodes, UsageErrors) {
  EXPECT_EQ(run("decompose --method nope '" + sample("diagonal_pair") + "'").exit_code, 2);
  EXPECT_EQ(run("--tol-rank -1 psum '" + sample("diagonal_pair") + "'").exit_code, 2);
  EXPECT_EQ(run("frobnicate").exit_code, 2);
}

TEST(CliExitCodes, NumericalFailure) {
  // Frobenius norms overflow, so the residual diagnostics cannot be finite
  TempDir tmp;
  const std::string big = tmp.file(
      "big.json",
      R"({"version": "1.0", "kind": "operator_pair", "payload": {)"
      R"("A": [[[1.7e308, 0], [0, 0]], [[0, 0], [1.7e308, 0]]],)"
      R"("B": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}})");
  const ToolRun r = run("psum '" + big + "'");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(json::parse(r.out)["error"]["type"], "numerical_failure");
}

TEST(CliExitCodes, IterateNonConvergenceStillReports) {
  const ToolRun r = run("--max-iter 2 decompose --method iterate --json '" + sample("complex_pair") + "'");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json report = json::parse(r.out);
  EXPECT_EQ(report["diagnostics"]["converged"], false);
  EXPECT_EQ(report["diagnostics"]["iterations"], 2);
  EXPECT_TRUE(report["decomposition"].contains("ac"));
}

TEST(CliReports, DeterministicBodies) {
  for (const char* name : kSamples)
    for (const char* args : {"psum", "check", "decompose --method iterate",
                             "decompose --method direct", "decompose --method ando --cross-check"}) {
      const std::string cmd = std::string("--json ") + args + " '" + sample(name) + "'";
      const ToolRun a = run(cmd), b = run(cmd);
      ASSERT_EQ(a.exit_code, 0) << name << " " << args << "\n" << a.out;
      EXPECT_EQ(strip_time(json::parse(a.out)).dump(), strip_time(json::parse(b.out)).dump())
          << name << " " << args;
    }
}

TEST(CliReports, ResidualsAreNonnegativeAndConvergedFlagPresent) {
  for (const char* name : kSamples) {
    const ToolRun r = run("--json decompose --method iterate '" + sample(name) + "'");
    const json d = json::parse(r.out)["diagnostics"];
    for (const char* key : {"sum_residual", "singularity_norm", "range_leak", "method_residual"})
      EXPECT_GE(d[key].get<double>(), 0.0) << name << " " << key;
    EXPECT_TRUE(d["converged"].is_boolean());
  }
}

TEST(CliReports, OutputFileMatchesStdout) {
  TempDir tmp;
  const std::string out = tmp.path("report.json");
  const ToolRun r = run("--json --output '" + out + "' decompose '" + sample("functional_pair") + "'");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(json::parse(lebdec::cli::read_file(out)), json::parse(r.out));
}

TEST(CliReports, DigestAndStdin) {
  const std::string path = sample("skew_ranges");
  const ToolRun from_file = run("--json check '" + path + "'");
  const ToolRun from_stdin = run("--json check -", path);
  ASSERT_EQ(from_stdin.exit_code, 0);
  const json a = json::parse(from_file.out), b = json::parse(from_stdin.out);
  EXPECT_EQ(a["input_digest"], lebdec::cli::sha256_hex(lebdec::cli::read_file(path)));
  EXPECT_EQ(strip_time(a), strip_time(b));
  EXPECT_EQ(a["predicates"]["singular"], true);
  EXPECT_EQ(a["predicates"]["absolutely_continuous"], false);
}

TEST(CliReports, Sha256KnownVector) {
  EXPECT_EQ(lebdec::cli::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CliReports, PsumHalvesIdentity) {
  const json r = json::parse(run("--json psum '" + sample("identity_pair") + "'").out);
  const auto s = lebdec::cli::matrix_from_json(r["parallel_sum"], "parallel_sum");
  EXPECT_LE((s - 0.5 * lebdec::CMatrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_GE(r["diagnostics"]["min_eig_reference_minus_sum"].get<double>(), -1e-12);
}

TEST(CliRoundTrip, SamplesAndEmbeddedProblems) {
  std::vector<json> files;
  for (const char* name : kSamples) files.push_back(json::parse(lebdec::cli::read_file(sample(name))));
  const json fx = json::parse(lebdec::cli::read_file(LEBDEC_DEFAULT_FIXTURES));
  for (const auto& f : fx["fixtures"])
    if (f["op"] == "command" && f["args"].contains("problem")) files.push_back(f["args"]["problem"]);
  ASSERT_GT(files.size(), 10u);
  for (const json& j : files)
    EXPECT_EQ(lebdec::cli::serialize(lebdec::cli::problem_from_json(j)), j) << j.dump();
}

TEST(CliRoundTrip, PreservesNonHermitianRawData) {
  // validation happens after parsing, so raw entries survive unchanged
  const json j = {{"version", "1.0"},
                  {"kind", "operator_pair"},
                  {"payload",
                   {{"A", {{{1.0, 0.0}, {0.5, 0.25}}, {{0.5, -0.25}, {2.0, 0.0}}}},
                    {"B", {{{1.0, 0.0}, {0.0, 0.0}}, {{1e-17, 0.0}, {0.0, 0.0}}}}}},
                  {"tolerances", {{"max_iter", 50}, {"iter_tol", 1e-12}}}};
  EXPECT_EQ(lebdec::cli::serialize(lebdec::cli::problem_from_json(j)), j);
}
