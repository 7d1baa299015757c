// Structured mesh generation: graded line walks, grid assembly with cell
// removal (notches, cut-out corners) and coordinate-based node set tagging.

#include "crackband/meshgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace crackband {

namespace {

constexpr double kSnapTol = 1e-6;

// Walks from `start` towards `stop` with cells of size h0 inside the fine
// extent, growing geometrically outside, landing exactly on every `must`
// coordinate and on `stop`. Returns all generated lines excluding `start`.
std::vector<double> walk(double start, double stop, double h0,
                         double fine_extent, double growth, double hmax,
                         std::vector<double> must) {
  const double dir = stop > start ? 1.0 : -1.0;
  // work in the walk's own coordinate (distance from start)
  const double span = std::abs(stop - start);
  std::vector<double> marks;
  for (double m : must) {
    const double d = (m - start) * dir;
    if (d > kSnapTol && d < span - kSnapTol) marks.push_back(d);
  }
  std::sort(marks.begin(), marks.end());

  std::vector<double> out;
  double x = 0.0, step = h0;
  size_t mi = 0;
  while (x < span - kSnapTol) {
    if (x >= fine_extent - kSnapTol) step = std::min(step * growth, hmax);
    double next = x + step;
    while (mi < marks.size() && marks[mi] <= x + kSnapTol) ++mi;
    if (mi < marks.size() && next >= marks[mi] - 0.45 * step) {
      next = marks[mi];
      ++mi;
    } else if (next >= span - 0.45 * step) {
      next = span;
    }
    out.push_back(start + dir * next);
    x = next;
  }
  return out;
}

std::vector<double> dedupe_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || x - out.back() > kSnapTol) out.push_back(x);
  }
  return out;
}

// rectilinear grid with a keep predicate on cell centroids
struct GridBuilder {
  std::vector<double> xs, ys;
  std::vector<int> idmap;  // full-grid node index -> compact id (-1 unused)
  Mesh mesh;

  void build(double thickness,
             const std::function<bool(double, double)>& keep_cell) {
    const int nx = (int)xs.size(), ny = (int)ys.size();
    idmap.assign(nx * ny, -1);
    std::vector<std::array<int, 4>> cells;
    for (int iy = 0; iy + 1 < ny; ++iy) {
      for (int ix = 0; ix + 1 < nx; ++ix) {
        const double cx = 0.5 * (xs[ix] + xs[ix + 1]);
        const double cy = 0.5 * (ys[iy] + ys[iy + 1]);
        if (!keep_cell(cx, cy)) continue;
        cells.push_back({iy * nx + ix, iy * nx + ix + 1,
                         (iy + 1) * nx + ix + 1, (iy + 1) * nx + ix});
      }
    }
    for (const auto& c : cells)
      for (int i = 0; i < 4; ++i) idmap[c[i]] = 0;
    int id = 0;
    for (int n = 0; n < nx * ny; ++n)
      if (idmap[n] == 0) idmap[n] = id++;
      else idmap[n] = -1;

    mesh.thickness = thickness;
    mesh.nodes.resize(id);
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const int cid = idmap[iy * nx + ix];
        if (cid >= 0) mesh.nodes[cid] = {xs[ix], ys[iy]};
      }
    }
    mesh.elems.reserve(cells.size());
    for (const auto& c : cells)
      mesh.elems.push_back(
          {idmap[c[0]], idmap[c[1]], idmap[c[2]], idmap[c[3]]});
  }

  int line_index(const std::vector<double>& lines, double v,
                 const char* what) const {
    for (size_t i = 0; i < lines.size(); ++i)
      if (std::abs(lines[i] - v) <= kSnapTol) return (int)i;
    std::ostringstream msg;
    msg << "mesh generation: no grid line at " << what << " = " << v;
    throw config_error(msg.str());
  }

  int node_at(double x, double y) const {
    const int ix = line_index(xs, x, "x");
    const int iy = line_index(ys, y, "y");
    const int cid = idmap[iy * (int)xs.size() + ix];
    if (cid < 0) {
      std::ostringstream msg;
      msg << "mesh generation: node at (" << x << ", " << y
          << ") was removed with its cells";
      throw config_error(msg.str());
    }
    return cid;
  }

  std::vector<int> nodes_where(
      const std::function<bool(double, double)>& pred) const {
    std::vector<int> out;
    for (int n = 0; n < (int)mesh.nodes.size(); ++n)
      if (pred(mesh.nodes[n][0], mesh.nodes[n][1])) out.push_back(n);
    return out;
  }
};

}  // namespace

// ---------------------------------------------------------------------------

Mesh rect_mesh(double Lx, double Ly, int nx, int ny, double thickness) {
  if (nx < 1 || ny < 1 || !(Lx > 0.0) || !(Ly > 0.0))
    throw config_error("rect_mesh: invalid dimensions");
  GridBuilder gb;
  for (int i = 0; i <= nx; ++i) gb.xs.push_back(Lx * i / nx);
  for (int j = 0; j <= ny; ++j) gb.ys.push_back(Ly * j / ny);
  gb.build(thickness, [](double, double) { return true; });

  auto& sets = gb.mesh.node_sets;
  sets["left"] = gb.nodes_where([&](double x, double) { return x <= kSnapTol; });
  sets["right"] =
      gb.nodes_where([&](double x, double) { return x >= Lx - kSnapTol; });
  sets["bottom"] = gb.nodes_where([&](double, double y) { return y <= kSnapTol; });
  sets["top"] =
      gb.nodes_where([&](double, double y) { return y >= Ly - kSnapTol; });
  sets["bottom_left"] = {gb.node_at(0.0, 0.0)};
  sets["bottom_right"] = {gb.node_at(Lx, 0.0)};
  return gb.mesh;
}

// ---------------------------------------------------------------------------

Mesh NotchedBeamParams::build() const {
  if (!(band_size > 0.0)) throw config_error("beam mesh: band_size must be positive");
  if (notch_width < band_size - kSnapTol)
    throw config_error("beam mesh: notch_width must be at least band_size");
  if (!(support_inset > 0.0 && support_inset < notch_center - band_left))
    throw config_error("beam mesh: support_inset out of range");
  if (!(length - support_inset > notch_center + band_right))
    throw config_error("beam mesh: support_inset out of range");

  const double b = band_size;
  const double xc = notch_center;

  // one column is centred on the notch plane; the notch strip is split so
  // its edges fall on grid lines
  std::vector<double> lines = {xc - 0.5 * b, xc + 0.5 * b};
  std::vector<double> must_left = {xc - 0.5 * notch_width, support_inset};
  std::vector<double> must_right = {xc + 0.5 * notch_width,
                                    length - support_inset};
  if (load_x < xc - 0.5 * b) must_left.push_back(load_x);
  if (load_x > xc + 0.5 * b) must_right.push_back(load_x);

  for (double x : walk(xc - 0.5 * b, 0.0, b, band_left - 0.5 * b, growth,
                       max_size, must_left))
    lines.push_back(x);
  for (double x : walk(xc + 0.5 * b, length, b, band_right - 0.5 * b, growth,
                       max_size, must_right))
    lines.push_back(x);

  GridBuilder gb;
  gb.xs = dedupe_sorted(lines);
  const int ny = std::max(2, (int)std::lround(height / b));
  for (int j = 0; j <= ny; ++j) gb.ys.push_back(height * j / ny);
  const double hy = height / ny;
  const double depth = hy * std::lround(notch_depth / hy);

  const double nl = xc - 0.5 * notch_width, nr = xc + 0.5 * notch_width;
  gb.build(thickness, [&](double cx, double cy) {
    return !(cx > nl && cx < nr && cy < depth);
  });

  auto& sets = gb.mesh.node_sets;
  sets["support_left"] = {gb.node_at(support_inset, 0.0)};
  sets["support_right"] = {gb.node_at(length - support_inset, 0.0)};
  sets["load"] = gb.nodes_where([&](double x, double y) {
    return y >= height - kSnapTol && std::abs(x - load_x) <= platen_halfwidth + kSnapTol;
  });
  if (sets["load"].empty())
    throw config_error("beam mesh: no load nodes within the platen width");
  sets["mouth_left"] = {gb.node_at(nl, 0.0)};
  sets["mouth_right"] = {gb.node_at(nr, 0.0)};
  return gb.mesh;
}

// ---------------------------------------------------------------------------

Mesh LPanelParams::build() const {
  if (!(leg > 0.0 && leg < size))
    throw config_error("panel mesh: leg must lie in (0, size)");
  if (!(load_inset > 0.0 && load_inset < size - leg))
    throw config_error("panel mesh: load_inset out of range");
  const double b = band_size;
  const double corner = size - leg;  // height of the re-entrant corner

  // uniform fine columns across the crack path, graded into the right arm
  std::vector<double> lines;
  for (double x = 0.0; x < leg + kSnapTol; x += b) lines.push_back(x);
  for (double x :
       walk(leg, size, b, 2.0 * b, growth, max_size, {size - load_inset}))
    lines.push_back(x);

  GridBuilder gb;
  gb.xs = dedupe_sorted(lines);

  const double y_lo = corner - band_below * b;
  const double y_hi = corner + band_above * b;
  std::vector<double> ylines;
  for (double y = y_lo; y < y_hi + kSnapTol; y += b) ylines.push_back(y);
  for (double y : walk(y_lo, 0.0, b, 0.0, growth, max_size, {})) ylines.push_back(y);
  for (double y : walk(y_hi, size, b, 0.0, growth, max_size, {})) ylines.push_back(y);
  gb.ys = dedupe_sorted(ylines);

  gb.build(thickness,
           [&](double cx, double cy) { return !(cx > leg && cy < corner); });

  auto& sets = gb.mesh.node_sets;
  sets["base"] = gb.nodes_where([&](double, double y) { return y <= kSnapTol; });
  sets["load"] = {gb.node_at(size - load_inset, corner)};
  sets["anchor"] = {gb.node_at(0.0, 0.0)};
  sets["gauge_a"] = {gb.node_at(leg - gauge_offset, corner - gauge_offset)};
  sets["gauge_b"] = {gb.node_at(leg - gauge_offset, corner + gauge_offset)};
  return gb.mesh;
}

// ---------------------------------------------------------------------------

Mesh load_mesh_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open mesh file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("mesh file '" + path + "' is not valid JSON: " + e.what());
  }
  Mesh mesh;
  try {
    mesh.thickness = j.value("thickness", 1.0);
    for (const auto& n : j.at("nodes"))
      mesh.nodes.push_back({n.at(0).get<double>(), n.at(1).get<double>()});
    for (const auto& e : j.at("elems")) {
      std::array<int, 4> conn = {-1, -1, -1, -1};
      if (e.size() != 3 && e.size() != 4)
        throw config_error("mesh elements must have 3 or 4 nodes");
      for (size_t i = 0; i < e.size(); ++i) conn[i] = e.at(i).get<int>();
      mesh.elems.push_back(conn);
    }
    if (j.contains("node_sets")) {
      for (const auto& [name, arr] : j.at("node_sets").items())
        mesh.node_sets[name] = arr.get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error("mesh file '" + path + "' is malformed: " + std::string(e.what()));
  }
  mesh.validate();
  return mesh;
}

void save_mesh_json(const Mesh& mesh, const std::string& path) {
  nlohmann::json j;
  j["thickness"] = mesh.thickness;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& n : mesh.nodes) nodes.push_back({n[0], n[1]});
  auto& elems = j["elems"] = nlohmann::json::array();
  for (int e = 0; e < mesh.n_elems(); ++e) {
    if (mesh.is_tri(e))
      elems.push_back({mesh.elems[e][0], mesh.elems[e][1], mesh.elems[e][2]});
    else
      elems.push_back({mesh.elems[e][0], mesh.elems[e][1], mesh.elems[e][2],
                       mesh.elems[e][3]});
  }
  auto& sets = j["node_sets"] = nlohmann::json::object();
  for (const auto& [name, set] : mesh.node_sets) sets[name] = set;
  std::ofstream out(path);
  if (!out) throw config_error("cannot write mesh file '" + path + "'");
  out << j.dump(1) << "\n";
}

}  // namespace crackband
