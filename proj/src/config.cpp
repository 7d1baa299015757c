// Case configuration parsing and resolution. A key/value text file and a
// JSON document produce the same tree; one resolution path applies the
// generator presets and defaults and validates every key it sees.

#include "crackband/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace crackband {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// key/value text front end

bool parse_number(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

json typed_scalar(const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  double num = 0.0;
  if (parse_number(raw, num)) return num;
  return raw;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

json parse_schedule_text(const std::string& value, int line_no) {
  json sched = json::array();
  std::stringstream in(value);
  std::string pair;
  while (std::getline(in, pair, '|')) {
    const auto toks = split_ws(pair);
    double t = 0.0, f = 0.0;
    if (toks.size() != 2 || !parse_number(toks[0], t) ||
        !parse_number(toks[1], f)) {
      std::ostringstream msg;
      msg << "config line " << line_no
          << ": program.schedule expects 'time factor | time factor | ...'";
      throw config_error(msg.str());
    }
    sched.push_back({t, f});
  }
  return sched;
}

void insert_path(json& root, const std::string& dotted, json value,
                 int line_no) {
  json* node = &root;
  std::stringstream in(dotted);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(in, seg, '.')) segs.push_back(seg);
  for (size_t i = 0; i + 1 < segs.size(); ++i) {
    json& next = (*node)[segs[i]];
    if (!next.is_object() && !next.is_null()) {
      std::ostringstream msg;
      msg << "config line " << line_no << ": '" << dotted
          << "' conflicts with an earlier scalar value";
      throw config_error(msg.str());
    }
    node = &next;
  }
  if (node->contains(segs.back())) {
    std::ostringstream msg;
    msg << "config line " << line_no << ": duplicate key '" << dotted << "'";
    throw config_error(msg.str());
  }
  (*node)[segs.back()] = std::move(value);
}

json parse_kv_text(std::istream& in, const std::string& origin) {
  json root = json::object();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << origin << " line " << line_no << ": expected 'key = value'";
      throw config_error(msg.str());
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      std::ostringstream msg;
      msg << origin << " line " << line_no << ": expected 'key = value'";
      throw config_error(msg.str());
    }

    if (key == "constraint") {
      const auto toks = split_ws(value);
      double dof = 0.0, coeff = 0.0;
      if (toks.size() != 3 || !parse_number(toks[1], dof) ||
          !parse_number(toks[2], coeff)) {
        std::ostringstream msg;
        msg << origin << " line " << line_no
            << ": constraint expects 'node_set dof coefficient'";
        throw config_error(msg.str());
      }
      root["constraints"].push_back(
          {{"set", toks[0]}, {"dof", dof}, {"coefficient", coeff}});
    } else if (key == "gauge") {
      const auto toks = split_ws(value);
      double dof = 0.0;
      if (toks.size() != 3 || !parse_number(toks[2], dof)) {
        std::ostringstream msg;
        msg << origin << " line " << line_no
            << ": gauge expects 'set_a set_b dof'";
        throw config_error(msg.str());
      }
      root["gauge"] = {{"a", toks[0]}, {"b", toks[1]}, {"dof", dof}};
    } else if (key == "program.schedule") {
      insert_path(root, key, parse_schedule_text(value, line_no), line_no);
    } else {
      insert_path(root, key, typed_scalar(value), line_no);
    }
  }
  return root;
}

// ---------------------------------------------------------------------------
// typed readers with field-path diagnostics

const json* find_path(const json& root, const std::string& dotted) {
  const json* node = &root;
  std::stringstream in(dotted);
  std::string seg;
  while (std::getline(in, seg, '.')) {
    if (!node->is_object() || !node->contains(seg)) return nullptr;
    node = &(*node)[seg];
  }
  return node;
}

double read_num(const json& root, const std::string& key, double def) {
  const json* v = find_path(root, key);
  if (!v) return def;
  if (!v->is_number())
    throw config_error("config: '" + key + "' must be a number");
  return v->get<double>();
}

int read_int(const json& root, const std::string& key, int def) {
  const double x = read_num(root, key, def);
  const double r = std::lround(x);
  if (std::abs(x - r) > 0.0)
    throw config_error("config: '" + key + "' must be an integer");
  return (int)r;
}

bool read_flag(const json& root, const std::string& key, bool def) {
  const json* v = find_path(root, key);
  if (!v) return def;
  if (!v->is_boolean())
    throw config_error("config: '" + key + "' must be true or false");
  return v->get<bool>();
}

std::string read_str(const json& root, const std::string& key,
                     const std::string& def) {
  const json* v = find_path(root, key);
  if (!v) return def;
  if (!v->is_string())
    throw config_error("config: '" + key + "' must be a string");
  return v->get<std::string>();
}

// ---------------------------------------------------------------------------
// generator parameter schemas and refinement presets

const std::set<std::string>& generator_fields(const std::string& builtin) {
  static const std::set<std::string> rect = {"Lx", "Ly", "nx", "ny",
                                             "thickness"};
  static const std::set<std::string> beam = {
      "length",     "height",   "thickness",        "support_inset",
      "notch_center", "notch_width", "notch_depth", "load_x",
      "platen_halfwidth", "band_size", "band_left", "band_right",
      "growth",     "max_size"};
  static const std::set<std::string> panel = {
      "size",      "leg",        "thickness", "load_inset", "band_size",
      "band_below", "band_above", "growth",    "max_size",   "gauge_offset"};
  if (builtin == "rect") return rect;
  if (builtin == "notched_beam") return beam;
  if (builtin == "l_panel") return panel;
  throw config_error("config: 'mesh.builtin' must be one of rect, "
                     "notched_beam, l_panel (got '" + builtin + "')");
}

json generator_defaults(const std::string& builtin) {
  if (builtin == "rect")
    return {{"Lx", 1.0}, {"Ly", 1.0}, {"nx", 4}, {"ny", 4}, {"thickness", 1.0}};
  if (builtin == "notched_beam") {
    const NotchedBeamParams p;
    return {{"length", p.length},
            {"height", p.height},
            {"thickness", p.thickness},
            {"support_inset", p.support_inset},
            {"notch_center", p.notch_center},
            {"notch_width", p.notch_width},
            {"notch_depth", p.notch_depth},
            {"load_x", p.load_x},
            {"platen_halfwidth", p.platen_halfwidth},
            {"band_size", p.band_size},
            {"band_left", p.band_left},
            {"band_right", p.band_right},
            {"growth", p.growth},
            {"max_size", p.max_size}};
  }
  const LPanelParams p;
  return {{"size", p.size},
          {"leg", p.leg},
          {"thickness", p.thickness},
          {"load_inset", p.load_inset},
          {"band_size", p.band_size},
          {"band_below", p.band_below},
          {"band_above", p.band_above},
          {"growth", p.growth},
          {"max_size", p.max_size},
          {"gauge_offset", p.gauge_offset}};
}

json refinement_preset(const std::string& builtin,
                       const std::string& refinement) {
  if (refinement != "coarse" && refinement != "fine")
    throw config_error(
        "config: 'mesh.refinement' must be 'coarse' or 'fine' (got '" +
        refinement + "')");
  if (refinement == "coarse") return json::object();
  if (builtin == "notched_beam")
    return {{"band_size", 5.0}, {"band_left", 40.0}, {"band_right", 40.0}};
  if (builtin == "l_panel")
    return {{"band_size", 5.0}, {"band_below", 4.0}, {"band_above", 10.0}};
  return json::object();
}

// ---------------------------------------------------------------------------
// unknown-key detection

void collect_keys(const json& node, const std::string& prefix,
                  std::vector<std::string>& out) {
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object() && key != "params")
      collect_keys(value, path, out);
    else
      out.push_back(path);
  }
}

void reject_unknown_keys(const json& root, const std::string& builtin) {
  static const std::set<std::string> known = {
      "case",
      "mesh.source", "mesh.builtin", "mesh.refinement", "mesh.path",
      "mesh.params",
      "material.E", "material.nu", "material.sigma_y", "material.Gf",
      "material.beta", "material.d_c",
      "program.schedule", "program.initial_increment",
      "program.min_increment", "program.cutback_factor",
      "program.max_retries",
      "solver.residual_tol", "solver.max_newton_iter", "solver.growth_after",
      "solver.growth_factor", "solver.plane_stress", "solver.discontinuity",
      "solver.strict_closure", "solver.ell_override",
      "constraints", "gauge.a", "gauge.b", "gauge.dof",
      "output.dir", "output.snapshots", "output.every_n"};
  std::vector<std::string> keys;
  collect_keys(root, "", keys);
  for (const auto& k : keys) {
    if (known.count(k)) continue;
    throw config_error("config: unknown key '" + k + "'");
  }
  if (const json* params = find_path(root, "mesh.params")) {
    if (!params->is_object())
      throw config_error("config: 'mesh.params' must be a table of fields");
    const auto& fields = generator_fields(builtin);
    for (const auto& [key, value] : params->items()) {
      if (!fields.count(key))
        throw config_error("config: unknown key 'mesh.params." + key +
                           "' for generator '" + builtin + "'");
      if (!value.is_number())
        throw config_error("config: 'mesh.params." + key +
                           "' must be a number");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

CaseConfig case_config_from_json(const json& root_in) {
  if (!root_in.is_object()) throw config_error("config: expected an object");
  // a run-metadata document carries the case under "config"
  const json& root = (root_in.contains("config") && root_in["config"].is_object())
                         ? root_in["config"]
                         : root_in;

  CaseConfig cfg;
  cfg.name = read_str(root, "case", "case");
  cfg.mesh_source = read_str(root, "mesh.source", "builtin");
  if (cfg.mesh_source != "builtin" && cfg.mesh_source != "file")
    throw config_error("config: 'mesh.source' must be 'builtin' or 'file'");

  if (cfg.mesh_source == "builtin") {
    cfg.mesh_builtin = read_str(root, "mesh.builtin", "notched_beam");
    cfg.refinement = read_str(root, "mesh.refinement", "coarse");
    reject_unknown_keys(root, cfg.mesh_builtin);
    cfg.mesh_params = generator_defaults(cfg.mesh_builtin);
    cfg.mesh_params.update(refinement_preset(cfg.mesh_builtin, cfg.refinement));
    if (const json* params = find_path(root, "mesh.params"))
      cfg.mesh_params.update(*params);
  } else {
    cfg.mesh_path = read_str(root, "mesh.path", "");
    if (cfg.mesh_path.empty())
      throw config_error("config: 'mesh.path' is required for mesh.source = file");
    reject_unknown_keys(root, "rect");  // params are not used for files
    if (find_path(root, "mesh.params"))
      throw config_error("config: 'mesh.params' only applies to built-in meshes");
  }

  cfg.material.E = read_num(root, "material.E", cfg.material.E);
  cfg.material.nu = read_num(root, "material.nu", cfg.material.nu);
  cfg.material.sigma_y = read_num(root, "material.sigma_y", cfg.material.sigma_y);
  cfg.material.Gf = read_num(root, "material.Gf", cfg.material.Gf);
  cfg.material.beta = read_num(root, "material.beta", cfg.material.beta);
  cfg.material.d_c = read_num(root, "material.d_c", cfg.material.d_c);
  cfg.material.validate();

  const json* sched = find_path(root, "program.schedule");
  if (!sched) throw config_error("config: 'program.schedule' is required");
  if (!sched->is_array())
    throw config_error("config: 'program.schedule' must be a list of "
                       "[time, factor] pairs");
  cfg.program.schedule.clear();
  for (const auto& pair : *sched) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
        !pair[1].is_number())
      throw config_error("config: 'program.schedule' must be a list of "
                         "[time, factor] pairs");
    cfg.program.schedule.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  cfg.program.initial_increment =
      read_num(root, "program.initial_increment", cfg.program.initial_increment);
  cfg.program.min_increment =
      read_num(root, "program.min_increment", cfg.program.min_increment);
  cfg.program.cutback_factor =
      read_num(root, "program.cutback_factor", cfg.program.cutback_factor);
  cfg.program.max_retries =
      read_int(root, "program.max_retries", cfg.program.max_retries);
  cfg.program.validate();

  cfg.solver.residual_tol =
      read_num(root, "solver.residual_tol", cfg.solver.residual_tol);
  cfg.solver.max_newton_iter =
      read_int(root, "solver.max_newton_iter", cfg.solver.max_newton_iter);
  cfg.solver.growth_after =
      read_int(root, "solver.growth_after", cfg.solver.growth_after);
  cfg.solver.growth_factor =
      read_num(root, "solver.growth_factor", cfg.solver.growth_factor);
  cfg.solver.plane_stress =
      read_flag(root, "solver.plane_stress", cfg.solver.plane_stress);
  cfg.solver.material.discontinuity_enabled =
      read_flag(root, "solver.discontinuity", true);
  cfg.solver.material.strict_closure =
      read_flag(root, "solver.strict_closure", true);
  if (const json* ell = find_path(root, "solver.ell_override")) {
    if (ell->is_number())
      cfg.solver.ell_override = ell->get<double>();
    else if (!ell->is_null())
      throw config_error("config: 'solver.ell_override' must be a number");
  }
  if (cfg.solver.residual_tol <= 0.0)
    throw config_error("config: 'solver.residual_tol' must be positive");
  if (cfg.solver.max_newton_iter < 1)
    throw config_error("config: 'solver.max_newton_iter' must be at least 1");

  if (const json* cons = find_path(root, "constraints")) {
    if (!cons->is_array())
      throw config_error("config: 'constraints' must be a list");
    for (const auto& c : *cons) {
      if (!c.is_object() || !c.contains("set") || !c["set"].is_string() ||
          !c.contains("dof") || !c["dof"].is_number() ||
          !c.contains("coefficient") || !c["coefficient"].is_number())
        throw config_error("config: each constraint needs 'set', 'dof' and "
                           "'coefficient'");
      for (const auto& [key, value] : c.items()) {
        if (key != "set" && key != "dof" && key != "coefficient")
          throw config_error("config: unknown constraint field '" + key + "'");
      }
      Constraint out;
      out.node_set = c["set"].get<std::string>();
      const double dof = c["dof"].get<double>();
      if (dof != 0.0 && dof != 1.0)
        throw config_error("config: constraint dof must be 0 (x) or 1 (y)");
      out.dof = (int)dof;
      out.coefficient = c["coefficient"].get<double>();
      cfg.constraints.push_back(out);
    }
  }
  if (cfg.constraints.empty())
    throw config_error("config: at least one constraint is required");

  if (find_path(root, "gauge.a") || find_path(root, "gauge.b")) {
    cfg.gauge_a = read_str(root, "gauge.a", "");
    cfg.gauge_b = read_str(root, "gauge.b", "");
    if (cfg.gauge_a.empty() || cfg.gauge_b.empty())
      throw config_error("config: gauge needs both 'gauge.a' and 'gauge.b'");
    cfg.gauge_dof = read_int(root, "gauge.dof", 0);
    if (cfg.gauge_dof != 0 && cfg.gauge_dof != 1)
      throw config_error("config: 'gauge.dof' must be 0 (x) or 1 (y)");
  }

  cfg.output_dir = read_str(root, "output.dir", "out/" + cfg.name);
  const std::string snaps = read_str(root, "output.snapshots", "extrema");
  if (snaps == "extrema") {
    cfg.snapshots.mode = SnapshotPolicy::Mode::extrema;
  } else if (snaps == "every_n") {
    cfg.snapshots.mode = SnapshotPolicy::Mode::every_n;
  } else if (snaps == "final") {
    cfg.snapshots.mode = SnapshotPolicy::Mode::final_only;
  } else {
    throw config_error("config: 'output.snapshots' must be extrema, every_n "
                       "or final (got '" + snaps + "')");
  }
  cfg.snapshots.n = read_int(root, "output.every_n", 10);
  if (cfg.snapshots.n < 1)
    throw config_error("config: 'output.every_n' must be at least 1");

  // normalized echo of everything that determines the run
  json& res = cfg.resolved;
  res["case"] = cfg.name;
  res["mesh"]["source"] = cfg.mesh_source;
  if (cfg.mesh_source == "builtin") {
    res["mesh"]["builtin"] = cfg.mesh_builtin;
    res["mesh"]["refinement"] = cfg.refinement;
    res["mesh"]["params"] = cfg.mesh_params;
  } else {
    res["mesh"]["path"] = cfg.mesh_path;
  }
  res["material"] = {{"E", cfg.material.E},       {"nu", cfg.material.nu},
                     {"sigma_y", cfg.material.sigma_y}, {"Gf", cfg.material.Gf},
                     {"beta", cfg.material.beta}, {"d_c", cfg.material.d_c}};
  json sched_out = json::array();
  for (const auto& p : cfg.program.schedule) sched_out.push_back({p[0], p[1]});
  res["program"] = {{"schedule", sched_out},
                    {"initial_increment", cfg.program.initial_increment},
                    {"min_increment", cfg.program.min_increment},
                    {"cutback_factor", cfg.program.cutback_factor},
                    {"max_retries", cfg.program.max_retries}};
  res["solver"] = {{"residual_tol", cfg.solver.residual_tol},
                   {"max_newton_iter", cfg.solver.max_newton_iter},
                   {"growth_after", cfg.solver.growth_after},
                   {"growth_factor", cfg.solver.growth_factor},
                   {"plane_stress", cfg.solver.plane_stress},
                   {"discontinuity", cfg.solver.material.discontinuity_enabled},
                   {"strict_closure", cfg.solver.material.strict_closure}};
  res["solver"]["ell_override"] =
      cfg.solver.ell_override ? json(*cfg.solver.ell_override) : json();
  res["constraints"] = json::array();
  for (const auto& c : cfg.constraints)
    res["constraints"].push_back({{"set", c.node_set},
                                  {"dof", c.dof},
                                  {"coefficient", c.coefficient}});
  if (!cfg.gauge_a.empty())
    res["gauge"] = {{"a", cfg.gauge_a}, {"b", cfg.gauge_b}, {"dof", cfg.gauge_dof}};
  res["output"] = {{"dir", cfg.output_dir},
                   {"snapshots", snaps},
                   {"every_n", cfg.snapshots.n}};
  return cfg;
}

CaseConfig parse_case_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");

  const bool is_json = [&]() {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") return true;
    char c = 0;
    while (in.get(c)) {
      if (!std::isspace((unsigned char)c)) break;
    }
    in.clear();
    in.seekg(0);
    return c == '{';
  }();

  if (is_json) {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw config_error("config file '" + path + "' is not valid JSON: " +
                         e.what());
    }
    return case_config_from_json(j);
  }
  return case_config_from_json(parse_kv_text(in, "config file '" + path + "'"));
}

// ---------------------------------------------------------------------------

Mesh build_case_mesh(const CaseConfig& cfg) {
  if (cfg.mesh_source == "file") return load_mesh_json(cfg.mesh_path);

  const json& p = cfg.mesh_params;
  const auto num = [&](const char* key) { return p.at(key).get<double>(); };
  if (cfg.mesh_builtin == "rect") {
    return rect_mesh(num("Lx"), num("Ly"), (int)std::lround(num("nx")),
                     (int)std::lround(num("ny")), num("thickness"));
  }
  if (cfg.mesh_builtin == "notched_beam") {
    NotchedBeamParams b;
    b.length = num("length");
    b.height = num("height");
    b.thickness = num("thickness");
    b.support_inset = num("support_inset");
    b.notch_center = num("notch_center");
    b.notch_width = num("notch_width");
    b.notch_depth = num("notch_depth");
    b.load_x = num("load_x");
    b.platen_halfwidth = num("platen_halfwidth");
    b.band_size = num("band_size");
    b.band_left = num("band_left");
    b.band_right = num("band_right");
    b.growth = num("growth");
    b.max_size = num("max_size");
    return b.build();
  }
  LPanelParams l;
  l.size = num("size");
  l.leg = num("leg");
  l.thickness = num("thickness");
  l.load_inset = num("load_inset");
  l.band_size = num("band_size");
  l.band_below = num("band_below");
  l.band_above = num("band_above");
  l.growth = num("growth");
  l.max_size = num("max_size");
  l.gauge_offset = num("gauge_offset");
  return l.build();
}

Gauge resolve_gauge(const CaseConfig& cfg, const Mesh& mesh) {
  Gauge g;
  if (cfg.gauge_a.empty()) return g;
  const auto pick = [&](const std::string& set_name) {
    const auto it = mesh.node_sets.find(set_name);
    if (it == mesh.node_sets.end())
      throw config_error("config: gauge references unknown node set '" +
                         set_name + "'");
    if (it->second.size() != 1)
      throw config_error("config: gauge node set '" + set_name +
                         "' must contain exactly one node");
    return it->second[0];
  };
  g.node_a = pick(cfg.gauge_a);
  g.node_b = pick(cfg.gauge_b);
  g.dof = cfg.gauge_dof;
  return g;
}

}  // namespace crackband
