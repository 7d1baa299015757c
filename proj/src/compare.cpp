// Comparison of two finished runs from their on-disk artifacts.

#include "crackband/compare.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace crackband {

using nlohmann::json;

namespace {

constexpr const char* kCurveHeader =
    "step,time,u_control_mm,F_reaction,CMOD_mm,newton_iters_cum";

std::vector<StepRecord> load_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw config_error("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCurveHeader)
    throw config_error("'" + path + "' does not have the expected header '" +
                       kCurveHeader + "'");
  std::vector<StepRecord> curve;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      std::ostringstream msg;
      msg << "'" << path << "' line " << line_no << ": expected 6 columns";
      throw config_error(msg.str());
    }
    try {
      StepRecord r;
      r.step = std::stoi(cells[0]);
      r.time = std::stod(cells[1]);
      r.u_control = std::stod(cells[2]);
      r.reaction = std::stod(cells[3]);
      r.cmod = std::stod(cells[4]);
      r.newton_iters_cum = std::stol(cells[5]);
      curve.push_back(r);
    } catch (const std::exception&) {
      std::ostringstream msg;
      msg << "'" << path << "' line " << line_no << ": malformed number";
      throw config_error(msg.str());
    }
  }
  if (curve.empty())
    throw config_error("'" + path + "' contains no data rows");
  return curve;
}

const StepRecord* record_at_time(const std::vector<StepRecord>& curve,
                                 double t, double t_end) {
  for (const auto& r : curve)
    if (std::abs(r.time - t) <= 1e-9 * std::max(1.0, t_end)) return &r;
  return nullptr;
}

double peak_load(const std::vector<StepRecord>& curve) {
  double peak = 0.0;
  for (const auto& r : curve) peak = std::max(peak, std::abs(r.reaction));
  return peak;
}

// trapezoidal integral of F over the strictly increasing CMOD envelope
double envelope_energy(const std::vector<StepRecord>& curve) {
  double energy = 0.0;
  bool have_prev = false;
  double cm_max = 0.0, prev_cm = 0.0, prev_f = 0.0;
  for (const auto& r : curve) {
    if (!have_prev || r.cmod > cm_max) {
      if (have_prev)
        energy += 0.5 * (prev_f + r.reaction) * (r.cmod - prev_cm);
      cm_max = r.cmod;
      prev_cm = r.cmod;
      prev_f = r.reaction;
      have_prev = true;
    }
  }
  return std::abs(energy);
}

double rel_diff(double a, double b) {
  if (a == b) return 0.0;
  const double ref = std::abs(a);
  return ref > 0.0 ? std::abs(b - a) / ref
                   : std::numeric_limits<double>::infinity();
}

json opt_json(const std::optional<double>& v) {
  return v ? json(*v) : json();
}

}  // namespace

// ---------------------------------------------------------------------------

RunData load_run(const std::string& dir) {
  RunData run;
  run.dir = dir;
  run.curve = load_curve_csv(dir + "/curve.csv");
  const std::string meta_path = dir + "/run_meta.json";
  std::ifstream in(meta_path);
  if (!in) throw config_error("cannot open '" + meta_path + "'");
  try {
    in >> run.meta;
  } catch (const json::exception& e) {
    throw config_error("'" + meta_path + "' is not valid JSON: " + e.what());
  }
  return run;
}

CompareReport compare_runs(const RunData& a, const RunData& b) {
  const json* prog_a = a.meta.contains("config") &&
                               a.meta["config"].contains("program")
                           ? &a.meta["config"]["program"]
                           : nullptr;
  const json* prog_b = b.meta.contains("config") &&
                               b.meta["config"].contains("program")
                           ? &b.meta["config"]["program"]
                           : nullptr;
  if (!prog_a || !prog_b)
    throw config_error("comparison error: run metadata lacks the load program");
  const json sched_a = prog_a->value("schedule", json());
  const json sched_b = prog_b->value("schedule", json());
  if (sched_a != sched_b)
    throw config_error(
        "comparison error: the runs executed different load programs");

  CompareReport rep;
  rep.peak_a = peak_load(a.curve);
  rep.peak_b = peak_load(b.curve);
  rep.peak_rel_diff = rel_diff(rep.peak_a, rep.peak_b);
  rep.energy_a = envelope_energy(a.curve);
  rep.energy_b = envelope_energy(b.curve);
  rep.energy_rel_diff = rel_diff(rep.energy_a, rep.energy_b);
  rep.mesh_dependent = rep.peak_rel_diff > 0.10;

  // unloading legs: schedule segments whose |factor| decreases
  if (sched_a.is_array() && sched_a.size() >= 2) {
    const double t_end = sched_a.back()[0].get<double>();
    for (size_t i = 0; i + 1 < sched_a.size(); ++i) {
      const double t0 = sched_a[i][0].get<double>();
      const double f0 = sched_a[i][1].get<double>();
      const double t1 = sched_a[i + 1][0].get<double>();
      const double f1 = sched_a[i + 1][1].get<double>();
      if (std::abs(f1) >= std::abs(f0)) continue;

      UnloadSlope leg;
      leg.t_start = t0;
      leg.t_end = t1;
      const auto secant =
          [&](const std::vector<StepRecord>& curve) -> std::optional<double> {
        const StepRecord* r0 = record_at_time(curve, t0, t_end);
        const StepRecord* r1 = record_at_time(curve, t1, t_end);
        if (!r0 || !r1) return std::nullopt;
        const double dc = r1->cmod - r0->cmod;
        if (std::abs(dc) < 1e-12) return std::nullopt;
        return (r1->reaction - r0->reaction) / dc;
      };
      leg.slope_a = secant(a.curve);
      leg.slope_b = secant(b.curve);
      if (leg.slope_a && leg.slope_b && *leg.slope_a != 0.0)
        leg.ratio = *leg.slope_b / *leg.slope_a;
      rep.unload_slopes.push_back(leg);
    }
  }
  return rep;
}

json CompareReport::to_json() const {
  json j;
  j["peak_load"] = {{"a", peak_a},
                    {"b", peak_b},
                    {"rel_diff", peak_rel_diff}};
  j["envelope_energy"] = {{"a", energy_a},
                          {"b", energy_b},
                          {"rel_diff", energy_rel_diff}};
  j["unload_slopes"] = json::array();
  for (const auto& leg : unload_slopes)
    j["unload_slopes"].push_back({{"t_start", leg.t_start},
                                  {"t_end", leg.t_end},
                                  {"slope_a", opt_json(leg.slope_a)},
                                  {"slope_b", opt_json(leg.slope_b)},
                                  {"ratio", opt_json(leg.ratio)}});
  j["mesh_dependent"] = mesh_dependent;
  return j;
}

}  // namespace crackband
