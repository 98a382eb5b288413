#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "itl/hierarchy.hpp"
#include "itl/problems.hpp"
#include "itl/theory.hpp"
#include "itl/two_level.hpp"

namespace itl {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

struct ProblemSpec {
  std::string kind = "poisson1d";  // poisson1d | poisson2d | random_spd | matrix_market
  std::size_t m = 7;               // grid size for the Poisson problems
  std::size_t n = 8;               // random_spd size
  double cond = 10.0;
  std::uint64_t seed = 0;
  std::string path;  // matrix_market
};

struct SplittingConfig {
  std::string kind = "standard";  // standard | random | a_orthogonal | two_grid | files
  std::size_t n_s = 0;
  std::size_t n_c = 0;
  std::uint64_t seed = 0;
  bool force_rank_deficient = false;
  std::string s_path, p_path;  // files
};

struct SmootherConfig {
  std::string kind = "gauss_seidel";  // jacobi | weighted_jacobi | gauss_seidel | exact
  std::optional<double> omega;        // weighted_jacobi; absent means 1/λ_max(D_s⁻¹A_s)
};

struct InstanceSpec {
  ProblemSpec problem;
  SplittingConfig splitting;
  SmootherConfig smoother;

  std::string label() const;
};

struct ExperimentSpec {
  std::vector<InstanceSpec> instances;
  bool default_ensemble = false;
  RunConfig run;
  std::size_t trials = 1;
  std::string output;
  /// Pair every instance with its S = I counterpart (same P, same smoother kind on A).
  bool two_grid_companions = true;
};

/// ≥ 50 instances: poisson1d m ∈ {7,15,31} and poisson2d m ∈ {3,4,5} with four smoothers
/// each, plus 30 seeded random instances with n ≤ 12 (10 of them with rank(SᵀAP) < n_c).
std::vector<InstanceSpec> default_ensemble();

/// Parses the run-config JSON. Throws ConfigError naming the offending field.
ExperimentSpec parse_experiment(const Json& doc);
ExperimentSpec load_experiment(const std::filesystem::path& path);
Json to_json(const ExperimentSpec& spec);

ProblemInstance build_problem(const ProblemSpec& spec);
SplittingSpec build_splitting(const SplittingConfig& spec, const ProblemInstance& problem, const ProblemSpec& pspec);
Smoother build_smoother(const SmootherConfig& spec, const SymMatrix& a_s);
Hierarchy build_hierarchy(const InstanceSpec& spec, const ProblemInstance& problem);
/// S = I hierarchy with the instance's P and the smoother kind applied to A.
Hierarchy build_two_grid_companion(const InstanceSpec& spec, const ProblemInstance& problem, const Hierarchy& h);

/// Trial τ starts from a Gaussian u⁽⁰⁾ drawn from derive_seed(seed, {τ, 0x75300}).
Vector initial_guess(std::size_t n, std::uint64_t seed, std::uint64_t trial);

struct ReportDocument {
  Json body;
  bool passed = true;
};

/// Exit status per the CLI contract: 0 all checks pass, 1 a check failed.
inline int exit_code(const ReportDocument& doc) { return doc.passed ? 0 : 1; }

ReportDocument cmd_verify_identities(const ExperimentSpec& spec, unsigned threads = 1);
ReportDocument cmd_run(const ExperimentSpec& spec, unsigned threads = 1);

struct SweepTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool passed = true;

  std::string to_csv() const;
  /// One object per row; numeric cells become numbers, empty cells null, "passed" a boolean.
  Json to_json() const;
};

/// parameter ∈ {ell, nu, n, omega, cond_target}; throws UnknownParameter otherwise and
/// ConfigError for an empty value list.
SweepTable cmd_sweep(const ExperimentSpec& spec, const std::string& parameter, const std::vector<double>& values,
                     unsigned threads = 1);

/// Writes A.mtx, S.mtx, P.mtx and problem.json into `directory`. Throws IoError.
Json cmd_export_problem(const ExperimentSpec& spec, const std::filesystem::path& directory);

Json to_json(const AccuracyCert& cert);
Json to_json(const TheoryReport& report);
Json to_json(const CheckSummary& check);
Json to_json(const RunTrace& trace);

/// Serialized report with a fixed layout; `timestamp` is the only run-dependent field.
std::string render(const ReportDocument& doc);

}  // namespace itl
