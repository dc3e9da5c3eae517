#pragma once

// Batch experiments: configuration, orchestration, acceptance metrics and
// reproducible artifacts (CSV tables, JSON checkpoints, a run manifest).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qkrf/io.hpp"
#include "qkrf/model.hpp"

namespace qkrf {

std::string version();

/// Worker count from QKRF_THREADS (default: hardware concurrency, at least 1).
int thread_count();

/// Runs fn(0..n-1) on up to thread_count() threads. Each index must write
/// only its own output slot; the first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& fn);

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<int> criteria;
};

const std::vector<ExperimentInfo>& experiment_catalog();

struct ExperimentConfig {
  std::string experiment;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  P1Options model;
  RadialFamily potential;
  double T = 1.0;
  double dt = 0.0;  // 0 selects 1/(4k)
  int substeps = 8;
  std::vector<int> k_list;
  int runs = 1;
  int trials = 1;
  double perturbation = 0.3;
  std::filesystem::path discrete_model;  // optional JSON model
};

/// Defaults of a named experiment; throws ConfigError for unknown names.
ExperimentConfig default_config(const std::string& experiment);

/// Overlays `j` on the experiment's defaults. Errors name the offending
/// field path, e.g. "config.model.radial_nodes". Relative paths resolve
/// against `base_dir`.
ExperimentConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const ExperimentConfig& cfg);

enum class Comparison { AtMost, Below, AtLeast, Within, Info };

struct Metric {
  std::string name;
  int criterion = 0;  // 0 for informational values
  double value = 0.0;
  Comparison comparison = Comparison::Info;
  double lo = 0.0;
  double hi = 0.0;
  bool pass = true;
  std::string artifact;  // CSV holding the underlying data

  bool evaluate() const;
};

struct RunManifest {
  std::string experiment;
  Json config;
  std::string version;
  double wall_clock = 0.0;  // seconds
  std::vector<Metric> metrics;
  std::vector<std::string> artifacts;  // relative to the output directory
  bool pass = false;
};

Json to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);

/// Runs the experiment, writing config.json, CSVs, checkpoints, metrics.csv
/// and manifest.json into cfg.output_dir.
RunManifest run_experiment(const ExperimentConfig& cfg);

struct ManifestCheck {
  bool pass = false;                  // every gated metric passes
  bool consistent = true;             // stored verdicts and artifacts agree
  std::vector<std::string> problems;
};

/// Re-evaluates every metric, confirms the artifacts exist under `dir`, and
/// compares metrics.csv against the manifest.
ManifestCheck check_manifest(const RunManifest& m, const std::filesystem::path& dir);

struct EntropyRow {
  int k = 0;
  double s_k = 0.0;
  double s = 0.0;
  double diff = 0.0;
};

struct EntropyTable {
  std::vector<EntropyRow> rows;
  double max_increase = 0.0;   // largest diff_{next} - diff over rows with k >= decreasing_from
  double last_relative = 0.0;  // diff / S at the last k
};

/// Rows (k, S_k(p_k(φ0)), S(φ0), |difference|); S is taken from `classical`,
/// normally the same potential on a finer radial grid.
EntropyTable entropy_convergence_report(const PotentialField& phi0, const std::vector<int>& k_list,
                                        const PotentialField& classical, int decreasing_from = 4);

/// A A^† / n + I with Gaussian complex A.
HermForm random_form(int level, int dim, std::mt19937_64& rng);
/// base^{1/2} exp(X) base^{1/2}, X Hermitian Gaussian of entry size `size`.
HermForm perturbed_form(const HermForm& base, std::mt19937_64& rng, double size);
/// Diagonal base scaled entrywise by e^{g_i}; stays diagonal.
HermForm diagonal_perturbation(const HermForm& base, std::mt19937_64& rng, double size);

/// L^NA∘f_k of a diagonal norm: min over σ of max_j [(λ_j + jσ)/k - σ], λ
/// indexed by the monomial degree j; evaluated at the breakpoints.
double toric_l_na(const std::vector<double>& lambda_by_degree, int k);

}  // namespace qkrf
