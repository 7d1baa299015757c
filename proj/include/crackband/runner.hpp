#pragma once
// Case execution and artifact emission: curve.csv, fields_*.vtk and
// run_meta.json per run, plus the 1D two-cycle demonstration.

#include <string>

#include "crackband/config.hpp"

namespace crackband {

// Runs a configured 2D case and writes its artifacts. Returns the process
// exit code: 0 on success, 3 when the solver gave up (the partial history is
// flushed and an error record written).
int run_case(const CaseConfig& cfg);

struct Demo1dOptions {
  bool discontinuity = true;
  double ell = 30.0;            // band width [mm]
  std::string output_dir = "out/demo1d";
};

// Strain-driven two-cycle tension demo on the single-point 1D kernel:
// cycle 1 stays below the cracking threshold, cycle 2 crosses it so the
// unload shows the constant-stress closure plateau. Emits the same curve.csv
// schema as the 2D runner (u_control = strain * 1 mm, F = stress * 1 mm^2).
int run_demo1d(const Demo1dOptions& opt);

// Applies the output-directory override: when CRACKBAND_OUTPUT_DIR is set,
// the configured directory's leaf name is placed under it.
std::string resolve_output_dir(const std::string& configured);

}  // namespace crackband
