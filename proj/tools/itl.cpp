#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "itl/error.hpp"
#include "itl/report.hpp"

namespace {

constexpr int kExitConfig = 2;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("itl");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("ITL_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out;
  std::string format = "json";
  unsigned threads = 1;
  std::string param;
  std::vector<double> values;
};

itl::ExperimentSpec load(const Options& opt, bool default_to_ensemble) {
  itl::ExperimentSpec spec;
  if (!opt.config.empty()) {
    spec = itl::load_experiment(opt.config);
  } else if (default_to_ensemble) {
    spec.default_ensemble = true;
    spec.instances = itl::default_ensemble();
  } else {
    throw itl::Error(itl::ErrorKind::ConfigError, "--config is required");
  }
  if (opt.seed) spec.run.seed = *opt.seed;
  if (opt.trials) {
    if (*opt.trials < 1) throw itl::Error(itl::ErrorKind::ConfigError, "--trials must be at least 1");
    spec.trials = *opt.trials;
  }
  spdlog::info("{} instance(s), {} trial(s), seed {}", spec.instances.size(), spec.trials, spec.run.seed);
  return spec;
}

void emit(const Options& opt, const itl::ExperimentSpec& spec, const std::string& text) {
  const std::string path = !opt.out.empty() ? opt.out : spec.output;
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out || !(out << text)) throw itl::Error(itl::ErrorKind::IoError, "cannot write '" + path + "'");
  spdlog::info("wrote {}", path);
}

std::string checks_csv(const itl::ReportDocument& doc) {
  std::string csv = "check,kind,evaluated,skipped,violations,worst,tolerance,passed\n";
  for (const auto& [name, c] : doc.body["checks"].items()) {
    csv += name + "," + c["kind"].get<std::string>() + "," + c["evaluated"].dump() + "," + c["skipped"].dump() + "," +
           c["violations"].dump() + "," + (c["worst"].is_null() ? "" : c["worst"].dump()) + "," +
           c["tolerance"].dump() + "," + c["passed"].dump() + "\n";
  }
  return csv;
}

int report(const Options& opt, const itl::ExperimentSpec& spec, const itl::ReportDocument& doc) {
  emit(opt, spec, opt.format == "csv" ? checks_csv(doc) : itl::render(doc));
  if (!doc.passed) spdlog::error("at least one check failed");
  return itl::exit_code(doc);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Two-level method convergence meter"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "run configuration (JSON)");
    cmd->add_option("--seed", opt.seed, "override the configured seed");
    cmd->add_option("--trials", opt.trials, "override the configured trial count");
    cmd->add_option("--out", opt.out, "output path ('-' for stdout)");
    cmd->add_option("--format", opt.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1u, 256u));
  };

  auto* verify = app.add_subcommand("verify-identities", "check the exact-method identities on an ensemble");
  add_common(verify);
  auto* run = app.add_subcommand("run", "run the inexact method and check every bound");
  add_common(run);
  auto* sweep = app.add_subcommand("sweep", "run one parameter sweep, one CSV row per value");
  add_common(sweep);
  sweep->add_option("--param", opt.param, "ell | nu | n | omega | cond_target")->required();
  sweep->add_option("--values", opt.values, "parameter values")->required()->delimiter(',');
  auto* exporter = app.add_subcommand("export-problem", "write A, S, P as MatrixMarket plus a JSON sidecar");
  add_common(exporter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*verify) {
      const auto spec = load(opt, true);
      return report(opt, spec, itl::cmd_verify_identities(spec, opt.threads));
    }
    if (*run) {
      const auto spec = load(opt, false);
      return report(opt, spec, itl::cmd_run(spec, opt.threads));
    }
    if (*sweep) {
      const auto spec = load(opt, false);
      const itl::SweepTable table = itl::cmd_sweep(spec, opt.param, opt.values, opt.threads);
      if (opt.format == "json") {
        emit(opt, spec, table.to_json().dump(2) + "\n");
      } else {
        emit(opt, spec, table.to_csv());
      }
      return table.passed ? 0 : 1;
    }
    if (*exporter) {
      const auto spec = load(opt, false);
      const std::string dir = !opt.out.empty() ? opt.out : (spec.output.empty() ? "." : spec.output);
      const itl::Json sidecar = itl::cmd_export_problem(spec, dir);
      spdlog::info("exported {} to {}", sidecar["label"].get<std::string>(), dir);
      return 0;
    }
  } catch (const itl::Error& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
