#pragma once
// Built-in structured mesh generators for the benchmark geometries, plus a
// plain rectangle for tests. All generators produce graded quad meshes whose
// refined band is aligned with the expected crack so the band-width
// regularisation sees square elements along the localisation path.

#include <string>

#include "crackband/fem.hpp"

namespace crackband {

// uniform nx x ny grid on [0,Lx] x [0,Ly] with boundary node sets
// ("left", "right", "bottom", "top", "bottom_left", "bottom_right")
Mesh rect_mesh(double Lx, double Ly, int nx, int ny, double thickness = 1.0);

// Simply supported beam with a bottom notch, loaded from the top. The mesh
// keeps one element column centred on the notch plane so a straight crack
// localises into a single column; the notch is carved by removing whole
// cells of the refined band.
//
// Node sets: "support_left", "support_right" (single nodes on the bottom),
// "load" (platen nodes on the top edge around load_x), "mouth_left",
// "mouth_right" (notch mouth corners, the crack-opening gauge pair).
struct NotchedBeamParams {
  double length = 500.0;
  double height = 100.0;
  double thickness = 100.0;
  double support_inset = 25.0;   // supports at x = inset and length - inset
  double notch_center = 250.0;   // x of the notch plane
  double notch_width = 10.0;     // carved width (>= band_size)
  double notch_depth = 20.0;     // snapped to the element rows
  double load_x = 250.0;         // platen centre on the top edge
  // covers exactly the notch-strip columns at both refinement levels so the
  // load footprint is identical in mesh studies
  double platen_halfwidth = 5.5;
  double band_size = 10.0;       // element size inside the refined band
  double band_left = 30.0;       // fine-band extent left/right of the notch
  double band_right = 30.0;
  double growth = 1.6;           // cell growth ratio outside the band
  double max_size = 60.0;

  Mesh build() const;
};

// L-shaped panel: square domain with the lower-right quadrant removed,
// clamped along the bottom edge, driven vertically at a point near the tip
// of the lower edge of the right arm. The crack band runs horizontally from
// the re-entrant corner into the left half, which stays at square band_size
// cells in the rows around the corner height.
//
// Node sets: "base" (clamped bottom edge), "load" (driven node),
// "anchor" (bottom corner used as the fixed gauge reference), and
// "gauge_a"/"gauge_b" straddling the crack band at a fixed physical offset
// from the corner so refinement studies measure the same opening.
struct LPanelParams {
  double size = 500.0;
  double leg = 250.0;        // remaining width at the bottom
  double thickness = 100.0;
  double load_inset = 30.0;  // load node distance from the right edge
  double band_size = 10.0;
  double band_below = 2.0;   // fine rows below/above the corner line (x band_size)
  double band_above = 5.0;
  double growth = 1.6;
  double max_size = 60.0;
  double gauge_offset = 20.0;  // gauge pair at (leg - o, corner -/+ o)

  Mesh build() const;
};

// JSON mesh file round trip (nodes, elems, node_sets, thickness)
Mesh load_mesh_json(const std::string& path);
void save_mesh_json(const Mesh& mesh, const std::string& path);

}  // namespace crackband
