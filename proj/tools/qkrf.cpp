#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qkrf/error.hpp"
#include "qkrf/experiments.hpp"

namespace fs = std::filesystem;
using namespace qkrf;

namespace {

void print_metrics(const RunManifest& m) {
  for (const Metric& x : m.metrics) {
    std::string verdict = x.comparison == Comparison::Info ? "info" : (x.pass ? "PASS" : "FAIL");
    std::printf("  %-4s  [%2d] %-36s %s\n", verdict.c_str(), x.criterion, x.name.c_str(),
                format_double(x.value).c_str());
  }
}

int cmd_run(const std::string& path) {
  const fs::path p(path);
  const ExperimentConfig cfg = parse_config(read_json(p), p.parent_path());
  std::printf("%s -> %s (threads: %d)\n", cfg.experiment.c_str(), cfg.output_dir.string().c_str(),
              thread_count());
  const RunManifest m = run_experiment(cfg);
  print_metrics(m);
  std::printf("%s in %.2f s\n", m.pass ? "PASS" : "FAIL", m.wall_clock);
  return m.pass ? 0 : 1;
}

int cmd_list() {
  for (const ExperimentInfo& e : experiment_catalog()) {
    std::string crit;
    for (int c : e.criteria) crit += (crit.empty() ? "" : ",") + std::to_string(c);
    std::printf("%-22s criteria %-6s %s\n", e.name.c_str(), crit.c_str(), e.summary.c_str());
  }
  return 0;
}

int cmd_check(const std::string& path) {
  const fs::path p(path);
  const RunManifest m = manifest_from_json(read_json(p));
  const ManifestCheck c = check_manifest(m, p.parent_path());
  std::printf("%s (version %s)\n", m.experiment.c_str(), m.version.c_str());
  print_metrics(m);
  for (const std::string& s : c.problems) std::printf("  problem: %s\n", s.c_str());
  const bool ok = c.pass && c.consistent;
  std::printf("%s\n", ok ? "PASS" : (c.consistent ? "FAIL" : "INCONSISTENT"));
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized Kähler-Ricci flow experiments. Threads: QKRF_THREADS."};
  app.require_subcommand(1);
  std::string config, manifest;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config, "config file")->required();
  auto* list = app.add_subcommand("list-experiments", "list the available experiments");
  auto* check = app.add_subcommand("check", "re-evaluate a run manifest");
  check->add_option("manifest", manifest, "manifest.json")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config);
    if (*list) return cmd_list();
    if (*check) return cmd_check(manifest);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
