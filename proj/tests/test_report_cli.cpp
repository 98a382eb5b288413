#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "itl/matrix_market.hpp"
#include "itl/report.hpp"
#include "support.hpp"

using namespace itl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("itl_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string without_timestamp(const ReportDocument& doc) {
  Json body = doc.body;
  body.erase("timestamp");
  return body.dump(2);
}

ExperimentSpec spec_from(const std::string& text) { return parse_experiment(Json::parse(text)); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ITL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void expect_config_error_mentions(const std::string& text, const std::string& needle) {
  try {
    spec_from(text);
    ADD_FAILURE() << "expected ConfigError for " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(ParseExperiment, DefaultsAndRoundTrip) {
  const ExperimentSpec s = spec_from(R"({"problem":{"kind":"poisson2d","m":4},"inner":[{"kind":"cg","ell":3}],
                                         "nu":2,"postsmoothing":false,"seed":9,"trials":5})");
  ASSERT_EQ(s.instances.size(), 1u);
  EXPECT_EQ(s.instances[0].problem.kind, "poisson2d");
  EXPECT_EQ(s.instances[0].splitting.kind, "standard");
  EXPECT_EQ(s.run.nu, 2u);
  EXPECT_FALSE(s.run.postsmoothing);
  EXPECT_EQ(s.run.seed, 9u);
  EXPECT_EQ(s.trials, 5u);
  EXPECT_EQ(s.run.inner.at(0).ell, 3u);
  EXPECT_EQ(to_json(parse_experiment(to_json(s))).dump(), to_json(s).dump());
}

TEST(ParseExperiment, ErrorsNameTheField) {
  expect_config_error_mentions(R"({"problme":{}})", "problme");
  expect_config_error_mentions(R"({"problem":{"kind":"poisson1d","size":3}})", "problem.size");
  expect_config_error_mentions(R"({"nu":"two"})", "nu");
  expect_config_error_mentions(R"({"trials":0})", "trials");
  expect_config_error_mentions(R"({"inner":{"kind":"cg"}})", "inner");
  expect_config_error_mentions(R"({"inner":[{"kind":"cg","steps":2}]})", "inner[0]");
  expect_config_error_mentions(R"({"ensemble":"all"})", "ensemble");
  expect_config_error_mentions(R"([1,2])", "object");
}

TEST(LoadExperiment, InvalidJsonReportsLine) {
  const fs::path dir = scratch_dir("load");
  write_text(dir / "bad.json", "{\n  \"nu\": 1,\n  \"seed\": ,\n}\n");
  try {
    load_experiment(dir / "bad.json");
    ADD_FAILURE() << "expected ConfigError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("bad.json:3"), std::string::npos) << e.what();
  }
  EXPECT_ITL_ERROR(load_experiment(dir / "missing.json"), ErrorKind::IoError);
  fs::remove_all(dir);
}

TEST(DefaultEnsemble, Composition) {
  const std::vector<InstanceSpec> e = default_ensemble();
  EXPECT_GE(e.size(), 50u);
  int p1 = 0, p2 = 0, random = 0, deficient = 0;
  for (const auto& inst : e) {
    if (inst.problem.kind == "poisson1d") ++p1;
    if (inst.problem.kind == "poisson2d") ++p2;
    if (inst.problem.kind == "random_spd") {
      ++random;
      EXPECT_LE(inst.problem.n, 12u);
      if (inst.splitting.force_rank_deficient) ++deficient;
    }
  }
  EXPECT_EQ(p1, 12);
  EXPECT_EQ(p2, 12);
  EXPECT_GE(random, 20);
  EXPECT_GE(deficient, 10);
}

TEST(VerifyIdentities, DefaultEnsemblePasses) {
  ExperimentSpec spec;
  spec.default_ensemble = true;
  spec.instances = default_ensemble();
  const ReportDocument doc = cmd_verify_identities(spec, 2);
  EXPECT_TRUE(doc.passed);
  EXPECT_EQ(exit_code(doc), 0);
  EXPECT_EQ(doc.body["instances"].size(), spec.instances.size());
  EXPECT_EQ(doc.body["command"], "verify-identities");
  for (const auto& [name, c] : doc.body["checks"].items()) EXPECT_TRUE(c["passed"].get<bool>()) << name;
}

TEST(VerifyIdentities, ErrorsSurface) {
  ExperimentSpec empty;
  try {
    cmd_verify_identities(empty);
    ADD_FAILURE() << "expected ConfigError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("no instances"), std::string::npos);
  }
  const ExperimentSpec bad =
      spec_from(R"({"problem":{"kind":"poisson1d","m":7},"smoother":{"kind":"weighted_jacobi","omega":3.0}})");
  EXPECT_ITL_ERROR(cmd_verify_identities(bad), ErrorKind::SmootherInvalid);
  ReportDocument failed;
  failed.passed = false;
  EXPECT_EQ(exit_code(failed), 1);
}

TEST(RunReport, ExactChainContractionBoundedByNorm) {
  const ExperimentSpec spec = spec_from(R"({"problem":{"kind":"poisson2d","m":4},"seed":1,"trials":8})");
  const ReportDocument doc = cmd_run(spec);
  ASSERT_TRUE(doc.passed);
  const Json& inst = doc.body["instances"][0];
  const double norm = inst["theory"]["norm_E_TL"].get<double>();
  EXPECT_LE(inst["statistics"]["max_contraction"].get<double>(), norm + 1e-9);
  EXPECT_EQ(inst["runs"].size(), 8u);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(inst["runs"][t]["trial"].get<std::size_t>(), t);
}

TEST(RunReport, RcdMeanSquaredCoarseErrorWithinBound) {
  const ExperimentSpec spec = spec_from(
      R"({"problem":{"kind":"poisson1d","m":9},"inner":[{"kind":"rcd","ell":3}],"seed":77,"trials":10000})");
  const ReportDocument doc = cmd_run(spec, 2);
  const Json& inst = doc.body["instances"][0];
  ASSERT_EQ(inst["n_c"].get<std::size_t>(), 4u);
  const Json& st = inst["statistics"];
  EXPECT_EQ(st["samples"].get<std::size_t>(), 10000u);
  EXPECT_LE(st["mean_coarse_accuracy_sq"].get<double>(),
            st["certified_accuracy_sq"].get<double>() + 3.0 * st["se_coarse_accuracy_sq"].get<double>());
  EXPECT_TRUE(doc.passed);
}

TEST(RunReport, DeterministicAcrossRunsAndThreads) {
  const ExperimentSpec spec = spec_from(R"({"ensemble":[{"problem":{"kind":"poisson2d","m":4}},
      {"problem":{"kind":"random_spd","n":9,"cond":40,"seed":3},"splitting":{"kind":"random","seed":4}}],
      "inner":[{"kind":"rcd","ell":4},{"kind":"cg","ell":1}],"nu":2,"outer_sweeps":2,"seed":12345,"trials":16})");
  const std::string one = without_timestamp(cmd_run(spec, 1));
  EXPECT_EQ(one, without_timestamp(cmd_run(spec, 1)));
  EXPECT_EQ(one, without_timestamp(cmd_run(spec, 8)));
  ExperimentSpec other = spec;
  other.run.seed = 12346;
  EXPECT_NE(one, without_timestamp(cmd_run(other, 1)));
}

TEST(RunReport, HeaderFields) {
  const ReportDocument doc = cmd_run(spec_from(R"({"trials":1})"));
  const std::string text = render(doc);
  EXPECT_EQ(text.back(), '\n');
  const Json parsed = Json::parse(text);
  EXPECT_EQ(parsed["tool"]["name"], "itl");
  EXPECT_EQ(parsed["tool"]["version"], kToolVersion);
  const std::string ts = parsed["timestamp"].get<std::string>();
  EXPECT_EQ(ts.size(), 20u);
  EXPECT_EQ(ts.back(), 'Z');
  EXPECT_EQ(parsed["spec"].dump(), to_json(spec_from(R"({"trials":1})")).dump());
}

TEST(Sweep, CgStepsTightenTheBound) {
  const ExperimentSpec spec = spec_from(
      R"({"problem":{"kind":"poisson2d","m":5},"inner":[{"kind":"cg","ell":1}],"seed":3,"trials":20})");
  const SweepTable t = cmd_sweep(spec, "ell", {1, 2, 3, 4, 5, 6, 7, 8});
  ASSERT_EQ(t.rows.size(), 8u);
  EXPECT_TRUE(t.passed);
  const auto col = [&](const std::string& name) {
    return std::size_t(std::find(t.header.begin(), t.header.end(), name) - t.header.begin());
  };
  double previous = INFINITY;
  for (const auto& row : t.rows) {
    const double contraction = std::stod(row[col("contraction")]);
    EXPECT_LE(contraction, previous + 1e-12);
    EXPECT_LE(contraction, std::stod(row[col("sigma_ITL")]) + 1e-9);
    EXPECT_GE(std::stod(row[col("bound_slack")]), -1e-9);
    previous = contraction;
  }
  const std::string csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "ell,eps_cert,eps_cert_mode,eps_measured,sigma_ITL,contraction,bound_slack,passed");
}

TEST(Sweep, NuMultipliesCertificates) {
  const ExperimentSpec spec = spec_from(
      R"({"problem":{"kind":"poisson2d","m":5},"inner":[{"kind":"cg","ell":1}],"seed":3,"trials":3})");
  const SweepTable t = cmd_sweep(spec, "nu", {1, 2, 3});
  const double eps1 = std::stod(t.rows[0][1]);
  EXPECT_NEAR(std::stod(t.rows[1][1]), eps1 * eps1, 1e-15);
  EXPECT_NEAR(std::stod(t.rows[2][1]), eps1 * eps1 * eps1, 1e-15);
}

TEST(Sweep, Errors) {
  const ExperimentSpec spec = spec_from(R"({"problem":{"kind":"poisson1d","m":7}})");
  EXPECT_ITL_ERROR(cmd_sweep(spec, "ell", {}), ErrorKind::ConfigError);
  EXPECT_ITL_ERROR(cmd_sweep(spec, "temperature", {1.0}), ErrorKind::UnknownParameter);
}

TEST(ExportProblem, WritesMatrixMarketAndSidecar) {
  const fs::path dir = scratch_dir("export");
  const ExperimentSpec spec = spec_from(R"({"problem":{"kind":"poisson1d","m":7}})");
  const Json side = cmd_export_problem(spec, dir);
  EXPECT_EQ(side["n"].get<std::size_t>(), 7u);
  EXPECT_TRUE(fs::exists(dir / "problem.json"));
  std::ifstream a_in(dir / "A.mtx");
  std::string header;
  std::getline(a_in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real symmetric");
  const ProblemInstance p = poisson1d(7);
  EXPECT_EQ(mm::read_file(dir / "A.mtx"), p.A.matrix());
  EXPECT_EQ(mm::read_file(dir / "P.mtx"), standard_splitting_1d(7).P);
  EXPECT_EQ(mm::read_file(dir / "S.mtx"), standard_splitting_1d(7).S);

  // The exported files drive an equivalent instance.
  const ExperimentSpec from_files = spec_from(R"({"problem":{"kind":"matrix_market","path":")" +
                                              (dir / "A.mtx").string() + R"("},"splitting":{"kind":"files","S":")" +
                                              (dir / "S.mtx").string() + R"(","P":")" + (dir / "P.mtx").string() +
                                              R"("}})");
  const ReportDocument doc = cmd_verify_identities(from_files);
  EXPECT_TRUE(doc.passed);
  fs::remove_all(dir);
}

TEST(ExportProblem, UnwritablePathIsIoError) {
  const fs::path dir = scratch_dir("readonly");
  write_text(dir / "blocker", "x");
  const ExperimentSpec spec = spec_from(R"({"problem":{"kind":"poisson1d","m":7}})");
  try {
    cmd_export_problem(spec, dir / "blocker" / "out");
    ADD_FAILURE() << "expected IoError";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  EXPECT_EQ(run_cli("verify-identities --out " + (dir / "v.json").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "v.json"));
  write_text(dir / "bad_smoother.json", R"({"problem":{"kind":"poisson1d","m":7},"smoother":{"kind":"weighted_jacobi","omega":3}})");
  EXPECT_EQ(run_cli("verify-identities --config " + (dir / "bad_smoother.json").string()), 2);
  write_text(dir / "unknown.json", R"({"colour":"red"})");
  EXPECT_EQ(run_cli("run --config " + (dir / "unknown.json").string()), 2);
  EXPECT_EQ(run_cli("run"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  write_text(dir / "ok.json", R"({"problem":{"kind":"poisson1d","m":7},"inner":[{"kind":"cg","ell":1}],"trials":3})");
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " --format csv --out " + (dir / "c.csv").string()), 0);
  EXPECT_EQ(run_cli("sweep --config " + (dir / "ok.json").string() + " --param ell --values 1,2 --out " +
                    (dir / "s.csv").string() + " --format csv"),
            0);
  EXPECT_EQ(run_cli("sweep --config " + (dir / "ok.json").string() + " --param colour --values 1"), 2);
  EXPECT_EQ(run_cli("export-problem --config " + (dir / "ok.json").string() + " --out " + (dir / "exp").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "exp" / "A.mtx"));
  fs::remove_all(dir);
}

TEST(RunReport, ExactCertificateToleratesRoundoff) {
  // n_c = 1, so one CG step is exact and the certificate is zero.
  const ReportDocument doc = cmd_run(
      spec_from(R"({"problem":{"kind":"poisson2d","m":3},"inner":[{"kind":"cg","ell":1}],"trials":4})"));
  const Json& st = doc.body["instances"][0]["statistics"];
  EXPECT_EQ(st["certified_accuracy_sq"].get<double>(), 0.0);
  EXPECT_TRUE(doc.body["checks"]["expected_accuracy"]["passed"].get<bool>());
  EXPECT_TRUE(doc.passed);
}

TEST(Sweep, JsonRowsAreTyped) {
  const ExperimentSpec spec = spec_from(
      R"({"problem":{"kind":"poisson1d","m":7},"inner":[{"kind":"cg","ell":1}],"outer_sweeps":3,"trials":2})");
  const SweepTable t = cmd_sweep(spec, "ell", {1, 3});
  const Json rows = t.to_json();
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1]["ell"].get<double>(), 3.0);
  EXPECT_TRUE(rows[0]["eps_cert"].is_number());
  EXPECT_EQ(rows[0]["eps_cert_mode"], "deterministic");
  EXPECT_TRUE(rows[0]["passed"].is_boolean());
  // ell = n_c solves exactly, so later sweeps sit at roundoff and are left out of the contraction.
  EXPECT_LE(rows[1]["contraction"].get<double>(), rows[1]["sigma_ITL"].get<double>() + 1e-9);
  EXPECT_TRUE(t.passed);
}
