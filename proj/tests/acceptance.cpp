// Acceptance run: every experiment with its default configuration, then one
// PASS/FAIL line per criterion. Thresholds are pinned here and applied to the
// reported values independently of the verdicts the experiments store.
// Usage: qkrf_acceptance [output_dir]

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qkrf/error.hpp"
#include "qkrf/experiments.hpp"

using namespace qkrf;
namespace fs = std::filesystem;

namespace {

struct Pin {
  const char* experiment;
  const char* metric;
  int criterion;
  Comparison cmp;
  double lo, hi;
};

constexpr double inf = INFINITY;

// clang-format off
const Pin kPins[] = {
  {"balanced-fixed-point", "fixed_point_residual_max",       1, Comparison::AtMost,  -inf, 1e-9},
  {"balanced-fixed-point", "fixed_point_S_k_max",            1, Comparison::AtMost,  -inf, 1e-9},
  {"balanced-fixed-point", "gram_error_k1",                  1, Comparison::AtMost,  -inf, 1e-10},
  {"balanced-fixed-point", "normalization_error_max",        2, Comparison::AtMost,  -inf, 1e-10},
  {"euler-gap",            "fitted_slope",                   3, Comparison::AtMost,  -inf, -0.8},
  {"thmA-gap",             "fitted_slope",                   4, Comparison::AtMost,  -inf, -0.8},
  {"thmA-gap",             "classical_self_consistency",     4, Comparison::AtMost,  -inf, 1e-5},
  {"thmB-entropy",         "difference_max_increase_k_ge_4", 5, Comparison::Below,   -inf, 0.0},
  {"thmB-entropy",         "relative_difference_last_k",     5, Comparison::AtMost,  -inf, 0.02},
  {"thmB-entropy",         "zero_potential_S_k_max",         5, Comparison::AtMost,  -inf, 1e-8},
  {"thmB-entropy",         "refinement_change_max",          5, Comparison::AtMost,  -inf, 1e-8},
  {"slope-identity",       "trial_excess_max",               6, Comparison::AtMost,  -inf, 1e-9},
  {"slope-identity",       "canonical_gap_max",              6, Comparison::AtMost,  -inf, 1e-9},
  {"slope-identity",       "residual_ratio_min",             7, Comparison::AtLeast, 1.5,  inf},
  {"slope-identity",       "residual_ratio_max",             7, Comparison::AtMost,  -inf, 2.5},
  {"slope-identity",       "identity_value_max",             7, Comparison::AtMost,  -inf, 1e-9},
  {"monotonicity",         "worst_excess",                   8, Comparison::AtMost,  -inf, 0.0},
  {"duality",              "k1_min_S_k",                     9, Comparison::AtMost,  -inf, 0.01},
  {"duality",              "k1_panel_max_neg_S_na",          9, Comparison::Within,  -0.05, 0.05},
  {"duality",              "k1_one_sided_excess",            9, Comparison::AtMost,  -inf, 0.0},
  {"duality",              "k1_extraction_identity",         9, Comparison::AtMost,  -inf, 1e-9},
  {"duality",              "k2_min_S_k",                     9, Comparison::AtMost,  -inf, 0.01},
  {"duality",              "k2_panel_max_neg_S_na",          9, Comparison::Within,  -0.05, 0.05},
  {"duality",              "k2_one_sided_excess",            9, Comparison::AtMost,  -inf, 0.0},
  {"duality",              "k2_extraction_identity",         9, Comparison::AtMost,  -inf, 1e-9},
  {"na-panel",             "S_na_plus_uncertainty_min",      9, Comparison::AtLeast, 0.0,  inf},
  {"na-panel",             "toric_error_max",                9, Comparison::AtMost,  -inf, 1e-2},
  {"na-panel",             "translation_change_max",         9, Comparison::AtMost,  -inf, 1e-9},
  {"thmB-entropy",         "round_entropy_abs",             10, Comparison::AtMost,  -inf, 1e-10},
  {"thmB-entropy",         "entropy_min_non_round",         10, Comparison::AtLeast, 0.0,  inf},
  {"thmB-entropy",         "classical_slope_relative_max",  10, Comparison::AtMost,  -inf, 1e-3},
  {"thmB-entropy",         "energy_derivative_relative_max",10, Comparison::AtMost,  -inf, 1e-5},
};
// clang-format on

const char* kTitles[] = {
    "",
    "p_k(0) is balanced on the projective line",
    "sum of gen_eig(b_k(H), H) equals N_k",
    "quantized flow vs Bergman iteration, gap like 1/k",
    "quantized flow vs classical flow, gap like 1/k",
    "S_k(p_k(phi)) converges to S(phi)",
    "S_k is the supremum of its conjugate objective",
    "-d/dt L(f_k(H_t)) = S_k(H_t)",
    "differential inequality for S_k along the flow",
    "min S_k and sup of -S_k^NA agree at fixed k",
    "classical entropy, slope and energy identities",
};

bool holds(const Pin& p, double v) {
  if (!std::isfinite(v)) return false;
  switch (p.cmp) {
    case Comparison::AtMost: return v <= p.hi;
    case Comparison::Below: return v < p.hi;
    case Comparison::AtLeast: return v >= p.lo;
    case Comparison::Within: return v >= p.lo && v <= p.hi;
    case Comparison::Info: return true;
  }
  return false;
}

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string bound(const Pin& p) {
  switch (p.cmp) {
    case Comparison::AtMost: return "<= " + short_number(p.hi);
    case Comparison::Below: return "< " + short_number(p.hi);
    case Comparison::AtLeast: return ">= " + short_number(p.lo);
    case Comparison::Within: return "in [" + short_number(p.lo) + ", " + short_number(p.hi) + "]";
    case Comparison::Info: break;
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "qkrf_acceptance";
  std::map<std::string, RunManifest> runs;
  std::map<std::string, std::string> failures;
  for (const ExperimentInfo& e : experiment_catalog()) {
    ExperimentConfig cfg = default_config(e.name);
    cfg.output_dir = root / e.name;
    try {
      runs[e.name] = run_experiment(cfg);
      const ManifestCheck c = check_manifest(runs[e.name], cfg.output_dir);
      if (!c.consistent) failures[e.name] = "inconsistent manifest";
    } catch (const std::exception& x) {
      failures[e.name] = x.what();
    }
  }

  int failed = 0;
  for (int crit = 1; crit <= 10; ++crit) {
    bool ok = true;
    std::vector<std::string> detail;
    for (const Pin& p : kPins) {
      if (p.criterion != crit) continue;
      auto f = failures.find(p.experiment);
      if (f != failures.end()) {
        ok = false;
        detail.push_back(std::string(p.experiment) + ": " + f->second);
        continue;
      }
      const RunManifest& m = runs.at(p.experiment);
      const Metric* found = nullptr;
      for (const Metric& x : m.metrics)
        if (x.name == p.metric) found = &x;
      if (!found) {
        ok = false;
        detail.push_back(std::string(p.experiment) + "/" + p.metric + " missing");
        continue;
      }
      const bool pass = holds(p, found->value);
      ok = ok && pass;
      detail.push_back(std::string(pass ? "  ok   " : "  FAIL ") + p.experiment + "/" + p.metric + " = " +
                       format_double(found->value) + " (" + bound(p) + ")");
    }
    std::printf("criterion %2d: %s  %s\n", crit, ok ? "PASS" : "FAIL", kTitles[crit]);
    for (const std::string& d : detail) std::printf("    %s\n", d.c_str());
    if (!ok) ++failed;
  }
  std::printf("%d of 10 criteria pass\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
