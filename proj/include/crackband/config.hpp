#pragma once
// Benchmark case configuration: a nested key/value text file or an
// equivalent JSON document resolved into one validated structure. The fully
// resolved tree is kept verbatim so a finished run can be reproduced from
// its metadata alone.

#include <string>
#include <vector>

#include <json.hpp>

#include "crackband/fem.hpp"
#include "crackband/meshgen.hpp"

namespace crackband {

struct CaseConfig {
  std::string name = "case";

  // mesh source: a built-in generator with a refinement preset (plus
  // optional parameter overrides) or a mesh JSON file
  std::string mesh_source = "builtin";  // "builtin" | "file"
  std::string mesh_builtin = "notched_beam";
  std::string refinement = "coarse";    // "coarse" | "fine"
  std::string mesh_path;
  nlohmann::json mesh_params;           // fully resolved generator fields

  MaterialParams material;
  LoadProgram program;
  SolverSettings solver;
  std::vector<Constraint> constraints;

  std::string gauge_a, gauge_b;  // singleton node-set names; empty = no gauge
  int gauge_dof = 0;

  std::string output_dir;
  SnapshotPolicy snapshots;

  // the whole resolved configuration (defaults + presets + file) as JSON
  nlohmann::json resolved;
};

// Parses a .json document or a key/value file ("a.b.c = value" lines,
// '#' comments, repeated "constraint =" lines, "gauge = set_a set_b dof",
// "program.schedule = t f | t f | ...").
CaseConfig parse_case_config(const std::string& path);

// Builds the config from an already-parsed tree. Accepts either a bare case
// document or a run-metadata document carrying the case under "config".
CaseConfig case_config_from_json(const nlohmann::json& j);

// Instantiates the mesh (generator or file) described by the config.
Mesh build_case_mesh(const CaseConfig& cfg);

// Resolves the gauge node-set names against the mesh (singleton sets).
Gauge resolve_gauge(const CaseConfig& cfg, const Mesh& mesh);

}  // namespace crackband
