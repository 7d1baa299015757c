#pragma once
// Miniature plane finite element harness: linear triangles and bilinear
// quadrilaterals, displacement-controlled Newton-Raphson with adaptive
// increment cut-back, and per-element band-width regularisation of the
// material. Dimensions are mm, stresses MPa, forces N.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "crackband/material.hpp"

namespace crackband {

// ---------------------------------------------------------------------------
// mesh

struct Mesh {
  std::vector<std::array<double, 2>> nodes;
  // quad4 connectivity; triangles carry -1 in the last slot
  std::vector<std::array<int, 4>> elems;
  std::map<std::string, std::vector<int>> node_sets;
  double thickness = 1.0;  // out-of-plane thickness [mm]

  int n_nodes() const { return (int)nodes.size(); }
  int n_elems() const { return (int)elems.size(); }
  bool is_tri(int e) const { return elems[e][3] < 0; }
  int nodes_per_elem(int e) const { return is_tri(e) ? 3 : 4; }

  // index ranges, set references, element geometry (positive jacobians);
  // throws config_error naming the offender
  void validate() const;

  std::array<double, 4> bounding_box() const;  // xmin, ymin, xmax, ymax
};

// ---------------------------------------------------------------------------
// boundary conditions and load program

// Every node of `node_set` gets `coefficient * factor(t)` prescribed on
// `dof` (0 = x, 1 = y). A zero coefficient pins the dof; non-zero
// coefficients mark driven dofs whose internal forces sum to the reaction.
struct Constraint {
  std::string node_set;
  int dof = 1;
  double coefficient = 0.0;
};

// relative displacement u[node_b] - u[node_a] on `dof`, reported as the
// crack mouth opening
struct Gauge {
  int node_a = -1;
  int node_b = -1;
  int dof = 0;
};

struct LoadProgram {
  // piecewise-linear control factor over pseudo-time; must start at (0, 0)
  std::vector<std::array<double, 2>> schedule;
  double initial_increment = 0.05;  // pseudo-time step
  double min_increment = 1e-4;
  double cutback_factor = 0.5;
  int max_retries = 10;

  void validate() const;
  double factor_at(double t) const;
  double end_time() const { return schedule.back()[0]; }
};

struct SolverSettings {
  double residual_tol = 1e-6;  // relative force tolerance
  // Generous budget, shared across the branch passes of one increment: steps
  // where a band of cracks sits on the constant-stress plateau converge
  // linearly (the plateau has no stiffness to put in the matrix), and a
  // crack-front step can take several locked solves before the open/closed
  // assignment settles.
  int max_newton_iter = 150;
  int growth_after = 5;        // grow the increment when converged this fast
  double growth_factor = 1.5;
  bool plane_stress = true;    // plane strain otherwise
  // Discontinuity switch and closure accounting.  The solver defaults to
  // strict closure: an increment that closes a crack pushes the leftover
  // strain through the stress update immediately, so the band stiffens
  // against over-closure within the increment.  With consume-on-closure
  // accounting the band would transmit a constant stress no matter how far
  // it over-closed, and unloading steps would have no equilibrium to find.
  IntegrationOptions material{/*discontinuity_enabled=*/true,
                              /*strict_closure=*/true};
  // replaces the per-element band width by one global value (for studying
  // what happens when the regularisation is bypassed)
  std::optional<double> ell_override;
};

// ---------------------------------------------------------------------------
// results

struct StepRecord {
  int step = 0;
  double time = 0.0;
  double u_control = 0.0;  // control displacement factor [mm]
  double reaction = 0.0;   // negated internal-force sum at driven dofs [N]
  double cmod = 0.0;       // gauge opening [mm]
  long newton_iters_cum = 0;
};

struct FieldSnapshot {
  int step = 0;
  double time = 0.0;
  double u_control = 0.0;
  std::vector<double> damage;         // element averages
  std::vector<double> k;
  std::vector<double> crack_opening;  // n^T eps_d n
  std::vector<double> eps_p_max;      // largest principal plastic strain
};

struct SnapshotPolicy {
  enum class Mode { extrema, every_n, final_only } mode = Mode::extrema;
  int n = 1;
};

struct RunResult {
  std::vector<StepRecord> curve;
  std::vector<FieldSnapshot> snapshots;
  long total_newton_iters = 0;
  int deferred_steps = 0;  // steps that postponed chattering crack transitions
  bool aborted = false;
  std::string abort_reason;
};

// ---------------------------------------------------------------------------
// solver

class FemSolver {
 public:
  FemSolver(Mesh mesh, MaterialParams material, SolverSettings settings,
            std::vector<Constraint> constraints, Gauge gauge);

  int n_dofs() const { return 2 * mesh_.n_nodes(); }
  double char_length(int e) const { return elem_params_[e].ell; }
  const std::vector<DerivedParams>& elem_params() const { return elem_params_; }
  const Mesh& mesh() const { return mesh_; }
  const std::vector<PointState>& states() const { return committed_; }
  const Eigen::VectorXd& displacements() const { return u_; }

  // One full pass over the mesh from the committed states with the total
  // increment u - u_committed: refreshes the candidate states, assembles the
  // internal force and (optionally) the consistent tangent.
  //
  // With `locked` the pass evaluates the branch-locked sub-model the Newton
  // loop iterates on (see BranchLock): every point keeps its crack state of
  // record, points the loop has released are evaluated freely, and the
  // tangent blocks of open cracks are built analytically — a rank-one
  // damage-growth dyad while opening, a small regularizing operator on the
  // constant-stress plateau, whose true stiffness is zero.  The default is
  // the plain unlocked model with finite-difference point tangents; only
  // unlocked passes may produce states that get committed.
  void assemble(const Eigen::VectorXd& u, Eigen::VectorXd& f_int,
                Eigen::SparseMatrix<double>* K, bool locked = false);

  // advances the whole program; on solver failure the partial history is
  // returned with `aborted` set instead of throwing
  RunResult run_program(const LoadProgram& program,
                        const SnapshotPolicy& snapshots = {});

  // test access: commit the candidate states produced by the last assemble
  void commit(const Eigen::VectorXd& u);

  FieldSnapshot snapshot_fields(int step, double time, double u_control) const;

 private:
  struct QpData {
    int elem = 0;
    Eigen::MatrixXd B;   // 3 x 2n strain-displacement matrix
    double weight = 0.0; // gauss weight * detJ * thickness
  };

  void setup_quadrature();
  void setup_constraints();
  void derive_element_params();

  struct IncrementOutcome {
    bool converged = false;
    // crack transitions chattered and were postponed to the next increment;
    // the committed state is the locked equilibrium of the committed branches
    bool deferred = false;
    int iters_used = 0;
    double reaction = 0.0;  // from the converged assembly
    std::string note;
  };
  IncrementOutcome newton_increment(double factor);

  Mesh mesh_;
  MaterialParams material_;
  ElasticModuli moduli_;
  SolverSettings settings_;
  std::vector<Constraint> constraints_;
  Gauge gauge_;

  std::vector<DerivedParams> elem_params_;
  std::vector<QpData> qps_;
  std::vector<int> elem_qp_begin_;  // first qp index per element

  std::vector<PointState> committed_;
  std::vector<PointState> candidate_;
  std::vector<BranchLock> locks_;  // per-qp, maintained by newton_increment

  Eigen::VectorXd u_;            // committed displacements
  std::vector<int> dof_to_free_; // -1 for constrained dofs
  std::vector<int> free_dofs_;
  std::vector<std::pair<int, double>> prescribed_;  // (dof, coefficient)
  std::vector<int> driven_dofs_;                    // non-zero coefficient
  double residual_floor_ = 0.0;
};

}  // namespace crackband
