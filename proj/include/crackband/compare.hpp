#pragma once
// Run comparison: peak load, envelope dissipated energy and per-cycle
// unloading slopes between two finished run directories, with a
// mesh-dependence flag on diverging peaks.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crackband/fem.hpp"

namespace crackband {

struct RunData {
  std::string dir;
  nlohmann::json meta;            // run_meta.json
  std::vector<StepRecord> curve;  // curve.csv
};

// Loads curve.csv (validating the schema header) and run_meta.json.
RunData load_run(const std::string& dir);

struct UnloadSlope {
  double t_start = 0.0, t_end = 0.0;  // the unloading leg of the program
  std::optional<double> slope_a, slope_b, ratio;  // F per CMOD secants
};

struct CompareReport {
  double peak_a = 0.0, peak_b = 0.0;
  double peak_rel_diff = 0.0;      // |peak_b - peak_a| / |peak_a|
  double energy_a = 0.0, energy_b = 0.0;
  double energy_rel_diff = 0.0;
  std::vector<UnloadSlope> unload_slopes;
  bool mesh_dependent = false;     // peak divergence beyond 10%

  nlohmann::json to_json() const;
};

// Requires both runs to have executed the same load program (else
// config_error). Peak = max |F|; energy = trapezoidal integral of F over the
// monotone CMOD envelope; slopes = F/CMOD secants over unloading legs.
CompareReport compare_runs(const RunData& a, const RunData& b);

}  // namespace crackband
