#include "itl/report.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "itl/error.hpp"
#include "itl/linalg.hpp"
#include "itl/matrix_market.hpp"

namespace itl {

namespace {

// ---- JSON field access with schema diagnostics ----

void reject_unknown(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw Error(ErrorKind::ConfigError, "unknown field '" + where + key + "'");
    }
  }
}

const Json& require_object(const Json& j, const std::string& field) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "field '" + field + "' must be an object");
  return j;
}

template <class T>
T field(const Json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  const std::string name = where + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw Error(ErrorKind::ConfigError, "field '" + name + "' must be a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw Error(ErrorKind::ConfigError, "field '" + name + "' must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw Error(ErrorKind::ConfigError, "field '" + name + "' must be a number");
    return v.get<T>();
  } else {
    if (!v.is_number_unsigned()) throw Error(ErrorKind::ConfigError, "field '" + name + "' must be a non-negative integer");
    return static_cast<T>(v.get<std::uint64_t>());
  }
}

ProblemSpec parse_problem(const Json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where + ".", {"kind", "m", "n", "cond", "seed", "path"});
  ProblemSpec p;
  const std::string w = where + ".";
  p.kind = field<std::string>(j, "kind", w, p.kind);
  p.m = field<std::size_t>(j, "m", w, p.m);
  p.n = field<std::size_t>(j, "n", w, p.n);
  p.cond = field<double>(j, "cond", w, p.cond);
  p.seed = field<std::uint64_t>(j, "seed", w, p.seed);
  p.path = field<std::string>(j, "path", w, p.path);
  static const std::set<std::string> kinds{"poisson1d", "poisson2d", "random_spd", "matrix_market"};
  if (!kinds.count(p.kind)) throw Error(ErrorKind::ConfigError, "field '" + w + "kind': unknown problem '" + p.kind + "'");
  if (p.kind == "matrix_market" && p.path.empty()) {
    throw Error(ErrorKind::ConfigError, "field '" + w + "path' is required for matrix_market");
  }
  return p;
}

SplittingConfig parse_splitting(const Json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where + ".", {"kind", "n_s", "n_c", "seed", "force_rank_deficient", "S", "P"});
  SplittingConfig s;
  const std::string w = where + ".";
  s.kind = field<std::string>(j, "kind", w, s.kind);
  s.n_s = field<std::size_t>(j, "n_s", w, s.n_s);
  s.n_c = field<std::size_t>(j, "n_c", w, s.n_c);
  s.seed = field<std::uint64_t>(j, "seed", w, s.seed);
  s.force_rank_deficient = field<bool>(j, "force_rank_deficient", w, s.force_rank_deficient);
  s.s_path = field<std::string>(j, "S", w, s.s_path);
  s.p_path = field<std::string>(j, "P", w, s.p_path);
  static const std::set<std::string> kinds{"standard", "random", "a_orthogonal", "two_grid", "files"};
  if (!kinds.count(s.kind)) {
    throw Error(ErrorKind::ConfigError, "field '" + w + "kind': unknown splitting '" + s.kind + "'");
  }
  if (s.kind == "files" && (s.s_path.empty() || s.p_path.empty())) {
    throw Error(ErrorKind::ConfigError, "field '" + w + "S' and '" + w + "P' are required for files");
  }
  return s;
}

SmootherConfig parse_smoother(const Json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where + ".", {"kind", "omega"});
  SmootherConfig s;
  const std::string w = where + ".";
  s.kind = field<std::string>(j, "kind", w, s.kind);
  if (j.contains("omega")) {
    const Json& o = j.at("omega");
    if (o.is_string() && o.get<std::string>() == "auto") {
      s.omega.reset();
    } else if (o.is_number()) {
      s.omega = o.get<double>();
    } else {
      throw Error(ErrorKind::ConfigError, "field '" + w + "omega' must be a number or \"auto\"");
    }
  } else if (s.kind == "weighted_jacobi") {
    s.omega.reset();
  }
  static const std::set<std::string> kinds{"jacobi", "weighted_jacobi", "gauss_seidel", "exact"};
  if (!kinds.count(s.kind)) {
    throw Error(ErrorKind::ConfigError, "field '" + w + "kind': unknown smoother '" + s.kind + "'");
  }
  return s;
}

SolverSpec parse_solver(const Json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where + ".", {"kind", "ell", "blocks", "block_size", "matrix", "scale"});
  SolverSpec s;
  const std::string w = where + ".";
  if (!j.contains("kind")) throw Error(ErrorKind::ConfigError, "field '" + w + "kind' is required");
  s.kind = field<std::string>(j, "kind", w, s.kind);
  s.ell = field<std::size_t>(j, "ell", w, s.ell);
  s.block_size = field<std::size_t>(j, "block_size", w, s.block_size);
  s.matrix = field<std::string>(j, "matrix", w, s.matrix);
  s.scale = field<double>(j, "scale", w, s.scale);
  if (j.contains("blocks")) {
    const Json& b = j.at("blocks");
    if (!b.is_array()) throw Error(ErrorKind::ConfigError, "field '" + w + "blocks' must be an array of arrays");
    for (const Json& block : b) {
      if (!block.is_array()) throw Error(ErrorKind::ConfigError, "field '" + w + "blocks' must be an array of arrays");
      std::vector<std::size_t> idx;
      for (const Json& i : block) {
        if (!i.is_number_unsigned()) throw Error(ErrorKind::ConfigError, "field '" + w + "blocks' holds non-index");
        idx.push_back(i.get<std::size_t>());
      }
      s.blocks.push_back(std::move(idx));
    }
  }
  return s;
}

InstanceSpec parse_instance(const Json& j, const std::string& where) {
  InstanceSpec inst;
  if (j.contains("problem")) inst.problem = parse_problem(j.at("problem"), where + "problem");
  if (j.contains("splitting")) inst.splitting = parse_splitting(j.at("splitting"), where + "splitting");
  if (j.contains("smoother")) inst.smoother = parse_smoother(j.at("smoother"), where + "smoother");
  return inst;
}

// ---- serialization helpers ----

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json optional_number(const std::optional<double>& x) { return x ? number(*x) : Json(nullptr); }

Json to_json(const ProblemSpec& p) {
  Json j;
  j["kind"] = p.kind;
  if (p.kind == "poisson1d" || p.kind == "poisson2d") j["m"] = p.m;
  if (p.kind == "random_spd") {
    j["n"] = p.n;
    j["cond"] = p.cond;
  }
  if (p.kind == "matrix_market") j["path"] = p.path;
  j["seed"] = p.seed;
  return j;
}

Json to_json(const SplittingConfig& s) {
  Json j;
  j["kind"] = s.kind;
  if (s.kind != "standard" && s.kind != "files") {
    j["n_s"] = s.n_s;
    j["n_c"] = s.n_c;
    j["seed"] = s.seed;
  }
  if (s.kind == "random") j["force_rank_deficient"] = s.force_rank_deficient;
  if (s.kind == "files") {
    j["S"] = s.s_path;
    j["P"] = s.p_path;
  }
  return j;
}

Json to_json(const SmootherConfig& s) {
  Json j;
  j["kind"] = s.kind;
  if (s.kind == "weighted_jacobi") j["omega"] = s.omega ? Json(*s.omega) : Json("auto");
  return j;
}

Json to_json(const SolverSpec& s) {
  Json j;
  j["kind"] = s.kind;
  if (s.kind != "exact" && s.kind != "stationary") j["ell"] = s.ell;
  if (s.kind == "rbcd") {
    if (s.blocks.empty()) {
      j["block_size"] = s.block_size;
    } else {
      j["blocks"] = s.blocks;
    }
  }
  if (s.kind == "stationary") {
    j["matrix"] = s.matrix;
    if (s.matrix == "scaled") j["scale"] = s.scale;
  }
  return j;
}

Json to_json(const InstanceSpec& inst) {
  Json j;
  j["problem"] = to_json(inst.problem);
  j["splitting"] = to_json(inst.splitting);
  j["smoother"] = to_json(inst.smoother);
  return j;
}

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char text[32];
  std::strftime(text, sizeof text, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return text;
}

// Runs body(i) for i in [0, count) on up to `threads` workers. Results must be written to
// per-index slots by the caller; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(count);
  auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) guarded(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void merge_checks(std::map<std::string, CheckSummary>& into, const std::vector<CheckSummary>& from) {
  for (const CheckSummary& c : from) {
    auto [it, inserted] = into.try_emplace(c.name, c);
    if (inserted) continue;
    CheckSummary& agg = it->second;
    if (c.evaluated > 0) {
      if (agg.evaluated == 0) {
        agg.worst = c.worst;
      } else {
        agg.worst = c.is_slack ? std::min(agg.worst, c.worst) : std::max(agg.worst, c.worst);
      }
    }
    agg.evaluated += c.evaluated;
    agg.violations += c.violations;
    agg.skipped += c.skipped;
  }
}

Json checks_json(const std::map<std::string, CheckSummary>& checks, bool& passed) {
  Json j = Json::object();
  for (const auto& [name, c] : checks) {
    j[name] = to_json(c);
    passed = passed && c.passed();
  }
  return j;
}

Json header(const std::string& command, const ExperimentSpec& spec) {
  Json j;
  j["tool"] = {{"name", "itl"}, {"version", kToolVersion}};
  j["command"] = command;
  j["timestamp"] = iso_timestamp();
  j["spec"] = to_json(spec);
  return j;
}

Json instance_header(const InstanceSpec& inst, const ProblemInstance& problem, const Hierarchy& h) {
  Json j;
  j["label"] = problem.label;
  j["splitting"] = h.split().provenance;
  j["smoother"] = h.smoother().label();
  j["n"] = h.n();
  j["n_s"] = h.n_s();
  j["n_c"] = h.n_c();
  j["config"] = to_json(inst);
  return j;
}

// Contraction ratios are only meaningful while the error is above the roundoff level of u.
bool above_roundoff(const RunTrace& trace, const SweepRecord& s) {
  return s.err0 > 1e-12 * trace.solution_energy && s.err0 > 0.0;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / double(xs.size());
}

double standard_error(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(xs.size() - 1) / double(xs.size()));
}

struct InstanceRun {
  Json body;
  std::vector<CheckSummary> checks;
  TheoryReport theory;
  std::vector<RunTrace> traces;
};

InstanceRun run_instance(const ExperimentSpec& spec, const InstanceSpec& inst, unsigned threads) {
  const ProblemInstance problem = build_problem(inst.problem);
  const Hierarchy h = build_hierarchy(inst, problem);
  const std::size_t trials = spec.trials;

  InstanceRun out;
  out.traces.resize(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    RunConfig cfg = spec.run;
    cfg.trial = t;
    out.traces[t] = inexact_two_level(h, problem.f, initial_guess(h.n(), spec.run.seed, t), cfg);
  });

  out.theory = verify_all(h, out.traces);
  out.body = instance_header(inst, problem, h);
  out.body["theory"] = to_json(out.theory);

  // Sample statistics over every (trial, sweep) pair.
  std::vector<double> contraction, no_post, accuracy_sq, eps_measured;
  Json runs = Json::array();
  for (std::size_t t = 0; t < trials; ++t) {
    Json r = Json{{"trial", t}};
    r.update(to_json(out.traces[t]));
    runs.push_back(std::move(r));
    for (const SweepRecord& s : out.traces[t].sweeps) {
      if (above_roundoff(out.traces[t], s)) {
        contraction.push_back(s.err_final / s.err0);
        no_post.push_back(s.err2 / s.err0);
      }
      accuracy_sq.push_back(s.inner.overall_accuracy * s.inner.overall_accuracy);
      eps_measured.push_back(s.inner.eps_product());
    }
  }
  const AccuracyCert cert = out.traces.front().certificate;
  Json stats;
  stats["samples"] = contraction.size();
  stats["mean_contraction"] = number(mean_of(contraction));
  stats["se_contraction"] = number(standard_error(contraction));
  stats["max_contraction"] = number(contraction.empty() ? 0.0 : *std::max_element(contraction.begin(), contraction.end()));
  stats["mean_contraction_no_post"] = number(mean_of(no_post));
  stats["mean_eps_measured"] = number(mean_of(eps_measured));
  stats["mean_coarse_accuracy_sq"] = number(mean_of(accuracy_sq));
  stats["se_coarse_accuracy_sq"] = number(standard_error(accuracy_sq));
  stats["certified_accuracy_sq"] = number(cert.epsilon * cert.epsilon);
  if (cert.usable()) {
    stats["sigma_ITL_cert"] = number(sigma_ITL(out.theory.quantities.K_TL_spectral, out.theory.quantities.xzc, cert.epsilon));
    stats["bound_no_post_cert"] = number(bound_no_post_TL(out.theory.quantities.K_TL_spectral, cert.epsilon));
  } else {
    stats["sigma_ITL_cert"] = nullptr;
    stats["bound_no_post_cert"] = nullptr;
  }
  out.body["statistics"] = std::move(stats);
  out.body["runs"] = std::move(runs);

  out.checks = out.theory.checks;
  if (cert.usable() && !accuracy_sq.empty()) {
    // E‖A_c⁻¹r_c − e‖²_{A_c} ≤ ε²‖r_c‖²_{A_c⁻¹}: the sample mean may exceed ε² by at most 3 SE.
    // The tolerance admits measured accuracies of 1e-12 when the certificate is exact.
    CheckSummary c;
    c.name = "expected_accuracy";
    c.is_slack = true;
    c.tolerance = 1e-24;
    c.record(cert.epsilon * cert.epsilon + 3.0 * standard_error(accuracy_sq) - mean_of(accuracy_sq) +
             1e-12 * cert.epsilon * cert.epsilon);
    out.checks.push_back(c);
  }
  return out;
}

std::string format_value(double x) {
  if (!std::isfinite(x)) return "";
  char text[40];
  std::snprintf(text, sizeof text, "%.17g", x);
  return text;
}

double safe_omega(const SymMatrix& a_s) {
  const Vector d = a_s.diag();
  Vector inv_sqrt_d(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) inv_sqrt_d[i] = 1.0 / std::sqrt(d[i]);
  Matrix scaled = a_s.matrix();
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) scaled(i, j) *= inv_sqrt_d[i] * inv_sqrt_d[j];
  return 1.0 / sym_eigenvalues(SymMatrix(scaled)).back();
}

SplittingSpec default_structural_splitting(const ProblemSpec& pspec, const ProblemInstance& problem,
                                           const SplittingConfig& s) {
  if (pspec.kind == "poisson1d") return standard_splitting_1d(pspec.m);
  if (pspec.kind == "poisson2d") return standard_splitting_2d(pspec.m);
  const std::size_t n = problem.A.size();
  const std::size_t n_c = s.n_c ? s.n_c : n / 2;
  const std::size_t n_s = s.n_s ? s.n_s : n - n_c;
  return random_splitting(problem.A, n_s, n_c, s.seed, false);
}

}  // namespace

std::string InstanceSpec::label() const {
  std::string l = problem.kind;
  if (problem.kind == "poisson1d" || problem.kind == "poisson2d") l += "(m=" + std::to_string(problem.m) + ")";
  if (problem.kind == "random_spd") l += "(n=" + std::to_string(problem.n) + ",seed=" + std::to_string(problem.seed) + ")";
  return l + "/" + splitting.kind + "/" + smoother.kind;
}

std::vector<InstanceSpec> default_ensemble() {
  std::vector<InstanceSpec> out;
  const SmootherConfig smoothers[4] = {{"jacobi", std::nullopt},
                                       {"gauss_seidel", std::nullopt},
                                       {"weighted_jacobi", 0.8},
                                       {"exact", std::nullopt}};
  for (const char* kind : {"poisson1d", "poisson2d"}) {
    const bool one_d = std::string(kind) == "poisson1d";
    for (std::size_t m : one_d ? std::vector<std::size_t>{7, 15, 31} : std::vector<std::size_t>{3, 4, 5}) {
      for (const auto& sm : smoothers) {
        InstanceSpec inst;
        inst.problem.kind = kind;
        inst.problem.m = m;
        inst.smoother = sm;
        out.push_back(inst);
      }
    }
  }
  const SmootherConfig random_smoothers[3] = {{"gauss_seidel", std::nullopt},
                                              {"exact", std::nullopt},
                                              {"weighted_jacobi", std::nullopt}};
  for (std::uint64_t k = 1; k <= 30; ++k) {
    InstanceSpec inst;
    inst.problem.kind = "random_spd";
    inst.problem.n = 5 + k % 8;
    inst.problem.cond = 10.0 + 3.0 * double(k);
    inst.problem.seed = k;
    const std::size_t n = inst.problem.n;
    inst.splitting.kind = "random";
    inst.splitting.seed = 1000 + k;
    inst.splitting.n_c = std::max<std::size_t>(2, n / 3);
    inst.splitting.force_rank_deficient = k % 3 == 0;
    inst.splitting.n_s = std::min(n - 1, n - inst.splitting.n_c + (inst.splitting.force_rank_deficient ? 0 : k % 3));
    inst.smoother = random_smoothers[k % 3];
    out.push_back(inst);
  }
  return out;
}

ExperimentSpec parse_experiment(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "run configuration must be a JSON object");
  reject_unknown(doc, "", {"problem", "splitting", "smoother", "inner", "nu", "postsmoothing", "outer_sweeps", "seed",
                           "trials", "output", "ensemble", "two_grid_companions"});
  ExperimentSpec spec;
  if (doc.contains("ensemble")) {
    const Json& e = doc.at("ensemble");
    if (e.is_string()) {
      if (e.get<std::string>() != "default") throw Error(ErrorKind::ConfigError, "field 'ensemble' must be \"default\" or a list");
      spec.default_ensemble = true;
      spec.instances = default_ensemble();
    } else if (e.is_array()) {
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string where = "ensemble[" + std::to_string(i) + "].";
        require_object(e[i], "ensemble[" + std::to_string(i) + "]");
        reject_unknown(e[i], where, {"problem", "splitting", "smoother"});
        spec.instances.push_back(parse_instance(e[i], where));
      }
    } else {
      throw Error(ErrorKind::ConfigError, "field 'ensemble' must be \"default\" or a list");
    }
  } else {
    spec.instances.push_back(parse_instance(doc, ""));
  }

  spec.run.nu = field<std::size_t>(doc, "nu", "", spec.run.nu);
  spec.run.postsmoothing = field<bool>(doc, "postsmoothing", "", spec.run.postsmoothing);
  spec.run.outer_sweeps = field<std::size_t>(doc, "outer_sweeps", "", spec.run.outer_sweeps);
  spec.run.seed = field<std::uint64_t>(doc, "seed", "", spec.run.seed);
  spec.trials = field<std::size_t>(doc, "trials", "", spec.trials);
  spec.output = field<std::string>(doc, "output", "", spec.output);
  spec.two_grid_companions = field<bool>(doc, "two_grid_companions", "", spec.two_grid_companions);
  if (doc.contains("inner")) {
    const Json& inner = doc.at("inner");
    if (!inner.is_array()) throw Error(ErrorKind::ConfigError, "field 'inner' must be an array");
    spec.run.inner.clear();
    for (std::size_t i = 0; i < inner.size(); ++i) {
      spec.run.inner.push_back(parse_solver(inner[i], "inner[" + std::to_string(i) + "]"));
    }
  }
  if (spec.trials < 1) throw Error(ErrorKind::ConfigError, "field 'trials' must be at least 1");
  spec.run.validate();
  return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorKind::ConfigError, path.string() + ":" + std::to_string(line) + ": invalid JSON");
  }
  return parse_experiment(doc);
}

Json to_json(const ExperimentSpec& spec) {
  Json j;
  if (spec.default_ensemble) {
    j["ensemble"] = "default";
  } else if (spec.instances.size() == 1) {
    const Json inst = to_json(spec.instances.front());
    for (const auto& [k, v] : inst.items()) j[k] = v;
  } else {
    j["ensemble"] = Json::array();
    for (const auto& inst : spec.instances) j["ensemble"].push_back(to_json(inst));
  }
  j["inner"] = Json::array();
  for (const auto& s : spec.run.inner) j["inner"].push_back(to_json(s));
  j["nu"] = spec.run.nu;
  j["postsmoothing"] = spec.run.postsmoothing;
  j["outer_sweeps"] = spec.run.outer_sweeps;
  j["seed"] = spec.run.seed;
  j["trials"] = spec.trials;
  j["two_grid_companions"] = spec.two_grid_companions;
  if (!spec.output.empty()) j["output"] = spec.output;
  return j;
}

ProblemInstance build_problem(const ProblemSpec& spec) {
  if (spec.kind == "poisson1d") return poisson1d(spec.m, spec.seed);
  if (spec.kind == "poisson2d") return poisson2d(spec.m, spec.seed);
  if (spec.kind == "random_spd") return random_spd(spec.n, spec.cond, spec.seed);
  if (spec.kind == "matrix_market") {
    const Matrix a = mm::read_file(spec.path);
    if (!a.square()) throw Error(ErrorKind::DimensionMismatch, "matrix in '" + spec.path + "' is not square");
    return problem_from_matrix(SymMatrix(a), spec.seed, "matrix_market(" + spec.path + ")");
  }
  throw Error(ErrorKind::ConfigError, "unknown problem '" + spec.kind + "'");
}

SplittingSpec build_splitting(const SplittingConfig& spec, const ProblemInstance& problem, const ProblemSpec& pspec) {
  const std::size_t n = problem.A.size();
  if (spec.kind == "standard") {
    if (pspec.kind != "poisson1d" && pspec.kind != "poisson2d") {
      throw Error(ErrorKind::ConfigError, "standard splitting needs a poisson1d or poisson2d problem");
    }
    return default_structural_splitting(pspec, problem, spec);
  }
  if (spec.kind == "random") {
    const std::size_t n_c = spec.n_c ? spec.n_c : n / 2;
    const std::size_t n_s = spec.n_s ? spec.n_s : n - n_c;
    return random_splitting(problem.A, n_s, n_c, spec.seed, spec.force_rank_deficient);
  }
  if (spec.kind == "a_orthogonal") {
    const SplittingSpec base = default_structural_splitting(pspec, problem, spec);
    return a_orthogonal_splitting(problem.A, base.P, base.S);
  }
  if (spec.kind == "two_grid") return two_grid_splitting(default_structural_splitting(pspec, problem, spec).P);
  if (spec.kind == "files") {
    SplittingSpec s{mm::read_file(spec.s_path), mm::read_file(spec.p_path), "files"};
    return s;
  }
  throw Error(ErrorKind::ConfigError, "unknown splitting '" + spec.kind + "'");
}

Smoother build_smoother(const SmootherConfig& spec, const SymMatrix& a_s) {
  if (spec.kind == "jacobi") return make_smoother(SmootherKind::Jacobi, a_s);
  if (spec.kind == "gauss_seidel") return make_smoother(SmootherKind::GaussSeidel, a_s);
  if (spec.kind == "exact") return make_smoother(SmootherKind::Exact, a_s);
  if (spec.kind == "weighted_jacobi") {
    return make_smoother(SmootherKind::WeightedJacobi, a_s, spec.omega ? *spec.omega : safe_omega(a_s));
  }
  throw Error(ErrorKind::ConfigError, "unknown smoother '" + spec.kind + "'");
}

Hierarchy build_hierarchy(const InstanceSpec& spec, const ProblemInstance& problem) {
  SplittingSpec split = build_splitting(spec.splitting, problem, spec.problem);
  if (split.n() != problem.A.size()) throw Error(ErrorKind::DimensionMismatch, "splitting does not match A");
  Smoother smoother = build_smoother(spec.smoother, galerkin(split.S, problem.A));
  return Hierarchy::assemble(problem.A, std::move(split), std::move(smoother));
}

Hierarchy build_two_grid_companion(const InstanceSpec& spec, const ProblemInstance& problem, const Hierarchy& h) {
  return Hierarchy::assemble(problem.A, two_grid_splitting(h.P()), build_smoother(spec.smoother, problem.A));
}

Vector initial_guess(std::size_t n, std::uint64_t seed, std::uint64_t trial) {
  Rng rng(derive_seed(seed, {trial, 0x75300}));
  Vector u(n);
  for (double& x : u) x = rng.gaussian();
  return u;
}

Json to_json(const AccuracyCert& cert) {
  return Json{{"epsilon", number(cert.epsilon)}, {"mode", to_string(cert.mode)}, {"usable", cert.usable()}};
}

Json to_json(const CheckSummary& c) {
  Json j;
  j["kind"] = c.is_slack ? "slack" : "residual";
  j["tolerance"] = c.tolerance;
  j["evaluated"] = c.evaluated;
  j["skipped"] = c.skipped;
  j["violations"] = c.violations;
  j["worst"] = c.evaluated ? number(c.worst) : Json(nullptr);
  j["passed"] = c.passed();
  return j;
}

Json to_json(const TheoryReport& r) {
  const TheoryQuantities& q = r.quantities;
  Json j;
  j["norm_E_TL"] = number(q.norm_E_TL);
  j["convergence_factor_TL"] = number(q.convergence_factor);
  j["K_TL_spectral"] = number(q.K_TL_spectral);
  j["K_TL_supinf"] = optional_number(q.K_TL_supinf);
  j["K_TG"] = optional_number(q.K_TG);
  j["norm_E_TG"] = optional_number(q.norm_E_TG);
  j["mu_TL"] = optional_number(q.xzc.mu_TL);
  j["rank_SAP"] = q.xzc.rank_SAP;
  j["xzc_branch"] = to_string(q.xzc.branch);
  j["lambda_max_lemma"] = number(q.xzc.lambda_max);
  j["epsilon_cert"] = to_json(r.epsilon_cert);
  j["epsilon_measured"] = number(r.epsilon_measured);
  j["sigma_ITL"] = number(r.sigma_ITL);
  j["bound_no_post"] = number(r.bound_no_post);
  j["bound_ITG"] = optional_number(r.bound_ITG);
  j["bound_ITG_no_post"] = optional_number(r.bound_ITG_no_post);
  Json residuals = Json::object();
  for (const auto& [name, value] : r.identity_residuals) residuals[name] = number(value);
  j["identity_residuals"] = std::move(residuals);
  Json checks = Json::object();
  for (const auto& c : r.checks) checks[c.name] = to_json(c);
  j["checks"] = std::move(checks);
  return j;
}

Json to_json(const RunTrace& trace) {
  Json j;
  j["solvers"] = trace.solver_labels;
  j["certificate"] = to_json(trace.certificate);
  j["postsmoothing"] = trace.postsmoothing;
  j["solution_energy"] = number(trace.solution_energy);
  j["sweeps"] = Json::array();
  for (const SweepRecord& s : trace.sweeps) {
    Json sj;
    sj["err0"] = number(s.err0);
    sj["err1"] = number(s.err1);
    sj["err2"] = number(s.err2);
    sj["err_final"] = number(s.err_final);
    sj["contraction"] = s.err0 > 0.0 ? number(s.err_final / s.err0) : Json(nullptr);
    Json eps = Json::array();
    for (double e : s.inner.measured_eps) eps.push_back(number(e));
    sj["measured_eps"] = std::move(eps);
    sj["eps_product"] = number(s.inner.eps_product());
    sj["coarse_accuracy"] = number(s.inner.overall_accuracy);
    sj["short_circuited"] = s.inner.short_circuited;
    j["sweeps"].push_back(std::move(sj));
  }
  return j;
}

std::string render(const ReportDocument& doc) { return doc.body.dump(2) + "\n"; }

ReportDocument cmd_verify_identities(const ExperimentSpec& spec, unsigned threads) {
  if (spec.instances.empty()) throw Error(ErrorKind::ConfigError, "no instances");
  const std::size_t count = spec.instances.size();
  std::vector<Json> bodies(count);
  std::vector<std::vector<CheckSummary>> checks(count);

  parallel_for(count, threads, [&](std::size_t i) {
    const InstanceSpec& inst = spec.instances[i];
    const ProblemInstance problem = build_problem(inst.problem);
    const Hierarchy h = build_hierarchy(inst, problem);
    const TheoryReport tl = verify_all(h, {});
    Json body = instance_header(inst, problem, h);
    body["theory"] = to_json(tl);
    checks[i] = tl.checks;
    if (spec.two_grid_companions && !h.two_grid()) {
      const Hierarchy tg = build_two_grid_companion(inst, problem, h);
      const TheoryReport tgr = verify_all(tg, {});
      body["two_grid_theory"] = to_json(tgr);
      checks[i].insert(checks[i].end(), tgr.checks.begin(), tgr.checks.end());
    }
    bodies[i] = std::move(body);
  });

  ReportDocument doc;
  doc.body = header("verify-identities", spec);
  std::map<std::string, CheckSummary> merged;
  for (const auto& c : checks) merge_checks(merged, c);
  doc.body["instances"] = bodies;
  doc.body["checks"] = checks_json(merged, doc.passed);
  doc.body["passed"] = doc.passed;
  return doc;
}

ReportDocument cmd_run(const ExperimentSpec& spec, unsigned threads) {
  if (spec.instances.empty()) throw Error(ErrorKind::ConfigError, "no instances");
  ReportDocument doc;
  doc.body = header("run", spec);
  std::map<std::string, CheckSummary> merged;
  Json instances = Json::array();
  for (const InstanceSpec& inst : spec.instances) {
    InstanceRun run = run_instance(spec, inst, threads);
    merge_checks(merged, run.checks);
    instances.push_back(std::move(run.body));
  }
  doc.body["instances"] = std::move(instances);
  doc.body["checks"] = checks_json(merged, doc.passed);
  doc.body["passed"] = doc.passed;
  return doc;
}

std::string SweepTable::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

Json SweepTable::to_json() const {
  Json out = Json::array();
  for (const auto& row : rows) {
    Json r;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string& name = header[i];
      const std::string& cell = row[i];
      if (name == "eps_cert_mode") {
        r[name] = cell;
      } else if (name == "passed") {
        r[name] = cell == "true";
      } else if (cell.empty()) {
        r[name] = nullptr;
      } else {
        r[name] = std::stod(cell);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

SweepTable cmd_sweep(const ExperimentSpec& spec, const std::string& parameter, const std::vector<double>& values,
                     unsigned threads) {
  static const std::set<std::string> parameters{"ell", "nu", "n", "omega", "cond_target"};
  if (!parameters.count(parameter)) throw Error(ErrorKind::UnknownParameter, "cannot sweep '" + parameter + "'");
  if (values.empty()) throw Error(ErrorKind::ConfigError, "sweep needs at least one value");
  if (spec.instances.empty()) throw Error(ErrorKind::ConfigError, "no instances");

  SweepTable table;
  table.header = {parameter, "eps_cert", "eps_cert_mode", "eps_measured", "sigma_ITL", "contraction", "bound_slack",
                  "passed"};
  for (double value : values) {
    ExperimentSpec s = spec;
    s.instances.resize(1);
    InstanceSpec& inst = s.instances.front();
    auto as_count = [&](const char* what) {
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw Error(ErrorKind::ConfigError, std::string(what) + " values must be positive integers");
      }
      return static_cast<std::size_t>(value);
    };
    if (parameter == "ell") {
      for (auto& solver : s.run.inner) solver.ell = as_count("ell");
    } else if (parameter == "nu") {
      s.run.nu = as_count("nu");
      if (s.run.inner.size() != 1) s.run.inner.resize(1);
    } else if (parameter == "n") {
      if (inst.problem.kind == "random_spd") {
        inst.problem.n = as_count("n");
      } else {
        inst.problem.m = as_count("n");
      }
      inst.splitting.n_s = inst.splitting.n_c = 0;
    } else if (parameter == "omega") {
      inst.smoother.kind = "weighted_jacobi";
      inst.smoother.omega = value;
    } else {
      if (inst.problem.kind != "random_spd") throw Error(ErrorKind::ConfigError, "cond_target sweeps need random_spd");
      inst.problem.cond = value;
    }
    s.run.validate();

    const InstanceRun run = run_instance(s, inst, threads);
    double contraction = 0.0;
    for (const RunTrace& t : run.traces)
      for (const SweepRecord& r : t.sweeps)
        if (above_roundoff(t, r)) {
          contraction = std::max(contraction, (s.run.postsmoothing ? r.err_final : r.err2) / r.err0);
        }
    double slack = std::numeric_limits<double>::quiet_NaN();
    bool passed = true;
    for (const CheckSummary& c : run.checks) {
      passed = passed && c.passed();
      if (c.name == (s.run.postsmoothing ? "tl_bound_post" : "tl_bound_no_post") && c.evaluated) slack = c.worst;
    }
    table.passed = table.passed && passed;
    const AccuracyCert cert = run.traces.front().certificate;
    const double sigma = s.run.postsmoothing ? run.theory.sigma_ITL : run.theory.bound_no_post;
    table.rows.push_back({format_value(value), format_value(cert.epsilon), to_string(cert.mode),
                          format_value(run.theory.epsilon_measured), format_value(sigma), format_value(contraction),
                          format_value(slack), passed ? "true" : "false"});
  }
  return table;
}

Json cmd_export_problem(const ExperimentSpec& spec, const std::filesystem::path& directory) {
  if (spec.instances.empty()) throw Error(ErrorKind::ConfigError, "no instances");
  const InstanceSpec& inst = spec.instances.front();
  const ProblemInstance problem = build_problem(inst.problem);
  const Hierarchy h = build_hierarchy(inst, problem);

  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create directory '" + directory.string() + "': " + ec.message());
  mm::write_file(directory / "A.mtx", problem.A);
  mm::write_file(directory / "S.mtx", h.S());
  mm::write_file(directory / "P.mtx", h.P());

  Json sidecar;
  sidecar["label"] = problem.label;
  sidecar["splitting"] = h.split().provenance;
  sidecar["smoother"] = h.smoother().label();
  sidecar["n"] = h.n();
  sidecar["n_s"] = h.n_s();
  sidecar["n_c"] = h.n_c();
  sidecar["files"] = {{"A", "A.mtx"}, {"S", "S.mtx"}, {"P", "P.mtx"}};
  sidecar["residuals"] = {{"pi_idempotency", number(h.residuals().pi_idempotency)},
                          {"a_pi_symmetry", number(h.residuals().a_pi_symmetry)},
                          {"smoother_margin", number(h.residuals().smoother_margin)},
                          {"as_minus_mtilde_min", number(h.residuals().as_minus_mtilde_min)}};
  const std::filesystem::path side = directory / "problem.json";
  std::ofstream out(side);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + side.string() + "'");
  out << sidecar.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::IoError, "write failed for '" + side.string() + "'");
  return sidecar;
}

}  // namespace itl
