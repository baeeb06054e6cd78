#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fededs/codec.h"
#include "fededs/config.h"
#include "fededs/errors.h"
#include "fededs/gradcheck.h"
#include "fededs/orchestrator.h"

namespace {

int Run(const std::string& config_path, const std::string& metrics_path) {
  const fededs::SimConfig config = fededs::LoadConfig(config_path);
  const fededs::SimulationResult result = fededs::RunSimulation(config);
  const std::string csv = fededs::MetricsToCsv(result.metrics);
  if (metrics_path.empty()) {
    std::cout << csv;
  } else {
    fededs::WriteFileBytes(metrics_path, std::vector<uint8_t>(csv.begin(), csv.end()));
    const fededs::RoundMetrics& last = result.metrics.back();
    std::printf("rounds=%lld final_accuracy=%.4f comm_seconds=%.1f\n",
                static_cast<long long>(last.round), last.accuracy, last.cum_seconds);
  }
  return 0;
}

int Report(const std::vector<std::string>& metrics_paths,
           const std::vector<double>& targets) {
  std::vector<std::vector<fededs::RoundMetrics>> runs;
  for (const std::string& path : metrics_paths) {
    const std::vector<uint8_t> bytes = fededs::ReadFileBytes(path);
    runs.push_back(fededs::ParseMetricsCsv(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
  }
  std::printf("target");
  for (const std::string& path : metrics_paths) std::printf("\t%s", path.c_str());
  std::printf("\n");
  for (double target : targets) {
    std::printf("%.4g", target);
    for (const auto& metrics : runs) {
      const auto rounds = fededs::RoundsToTarget(metrics, target);
      if (rounds) {
        std::printf("\t%lld", static_cast<long long>(*rounds));
      } else {
        std::printf("\tx");
      }
    }
    std::printf("\n");
  }
  return 0;
}

int GradCheck(uint64_t seed) {
  bool ok = true;
  for (const fededs::GradCheckResult& r : fededs::RunGradientChecks(seed)) {
    std::printf("%-44s params=%-4zu checked=%-4zu max_rel_err=%.3e %s\n", r.name.c_str(),
                r.num_params, r.checked, r.max_relative_error, r.passed ? "ok" : "FAILED");
    ok = ok && r.passed;
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with encrypted data sharing"};
  app.require_subcommand(1);

  std::string config_path;
  std::string metrics_out;
  CLI::App* run = app.add_subcommand("run", "Run a simulation from a config file");
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--metrics", metrics_out, "Write the metrics CSV here instead of stdout");

  std::vector<std::string> metrics_in;
  std::vector<double> targets;
  CLI::App* report = app.add_subcommand("report", "Rounds-to-target table for metrics files");
  report->add_option("--metrics", metrics_in, "Metrics CSV (repeatable)")->required();
  report->add_option("--targets", targets, "Comma-separated accuracy targets")
      ->required()
      ->delimiter(',');

  uint64_t seed = 42;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--seed", seed, "Model seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return Run(config_path, metrics_out);
    if (*report) return Report(metrics_in, targets);
    if (*gradcheck) return GradCheck(seed);
  } catch (const fededs::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n",
                 std::string(fededs::ErrorKindName(e.kind())).c_str(), e.what());
    return fededs::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
