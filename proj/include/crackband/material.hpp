#pragma once
// Rate-independent plastic-damage model with a reversible discontinuity
// strain.
//
// Strain decomposition at every material point:
//
//     eps = eps_e + eps_p + eps_d
//
// eps_e drives the effective stress through isotropic elasticity, eps_p is
// classical (irreversible) plasticity with a Rankine yield surface and a
// non-associative Drucker-Prager flow potential, and eps_d is a reversible
// "discontinuity" strain that absorbs deformation increments once damage has
// localised, mimicking the opening of a crack. When the crack closes
// (n^T eps_d n < 0) the discontinuity strain is removed and the full elastic
// stiffness acts again, which gives the correct unilateral behaviour under
// cyclic loading.
//
// Total stress applies the scalar damage d to the tensile part of the
// effective stress only:
//
//     sigma = (1 - d) * sigma_eff_tensile + sigma_eff_compressive
//
// The damage evolution d = 1 - exp(-alpha k) is calibrated per element so the
// energy dissipated across a band of width ell equals the fracture energy
// (crack band regularisation).

#include <optional>

#include "crackband/tensor.hpp"

namespace crackband {

// ---------------------------------------------------------------------------
// parameters

struct MaterialParams {
  double E = 0.0;        // Young's modulus [MPa]
  double nu = 0.0;       // Poisson ratio
  double sigma_y = 0.0;  // tensile yield strength [MPa]
  double Gf = 0.0;       // fracture energy [N/mm]
  double beta = 0.0;     // dilatancy coefficient of the flow potential
  double d_c = 0.0;      // damage threshold activating the discontinuity strain

  void validate() const;  // throws config_error naming the offending field
};

// per-point (per-element) regularised softening constants
struct DerivedParams {
  double ell = 0.0;    // characteristic length of the band [mm]
  double alpha = 0.0;  // softening rate
  double k_c = 0.0;    // history threshold where d reaches d_c
};

// Softening rate that equates the energy dissipated by a band of width ell
// with Gf. Throws config_error when ell exceeds the snap-back bound
// 2 E Gf / sigma_y^2 (the message names the bound; callers add element ids).
double derive_alpha(const MaterialParams& mp, double ell);
double derive_kc(double alpha, double d_c);
DerivedParams derive_params(const MaterialParams& mp, double ell);

// ---------------------------------------------------------------------------
// state

struct PointState {
  SymTensor sigma_eff;  // effective stress (undamaged stiffness)
  SymTensor eps_p;      // plastic strain
  SymTensor eps_d;      // discontinuity strain (zero while the crack is closed)
  double k = 0.0;       // damage history variable, non-decreasing
  double d = 0.0;       // damage, always 1 - exp(-alpha k)
  bool crack_initiated = false;  // normal has been fixed
  bool crack_open = false;       // eps_d is currently active
  Eigen::Vector3d normal{0.0, 0.0, 0.0};  // crack normal, valid once initiated
};

// Equilibrium-iteration branch lock.  The crack state machine is not merely
// non-smooth at the open/closed transitions, it is discontinuous: an opening
// step rolls the whole increment into eps_d and a closure step releases the
// accumulated eps_d, so the stress jumps by a finite amount when an iterate
// crosses the transition surface.  An implicit solver that re-evaluates the
// transitions every iteration can hop that jump forever.  A lock pins the
// point to one branch for the duration of a linearized solve: stay_open
// keeps (or, from a closed state, forces) the crack open and skips the
// closure test; stay_closed keeps (or forces) it closed and skips the
// opening test.  The locked sub-model is smooth.  The solver re-checks the
// true transition rules on the converged iterate, re-locks disagreeing
// points onto their preferred branch and re-solves.  Locks are an
// equilibrium-loop device: committed states must always come from an
// unlocked (free) evaluation.
enum class BranchLock { free, stay_open, stay_closed };

struct IntegrationOptions {
  // master switch for the discontinuity strain; off reduces the model to a
  // conventional plastic-damage formulation
  bool discontinuity_enabled = true;
  // At crack closure the default behaviour consumes the strain increment
  // that produced the closure: the stress update resumes from the next
  // increment. With strict_closure the leftover increment (eps_d before
  // closure plus the current increment) is pushed through the elasto-plastic
  // update in the same step, which keeps the strain decomposition exact.
  bool strict_closure = false;
  // branch lock for the current evaluation (see BranchLock)
  BranchLock branch_lock = BranchLock::free;
};

// ---------------------------------------------------------------------------
// plasticity

struct ReturnMapResult {
  SymTensor sigma;    // mapped-back effective stress
  SymTensor deps_p;   // plastic strain increment
  double dgamma = 0.0;
  bool apex = false;  // apex return (deviatoric part exhausted)
};

// Rankine yield function f = max principal stress - sigma_y.
double yield_value(const SymTensor& sigma, double sigma_y);

// Explicit one-step return of an inadmissible trial stress onto f = 0 along
// the Drucker-Prager potential g = 3 beta p + q. Throws contract_violation if
// the trial state is admissible.
ReturnMapResult return_map(const SymTensor& trial, const ElasticModuli& em,
                           double sigma_y, double beta);

// ---------------------------------------------------------------------------
// damage

// fraction of tension in the principal stress state,
// w = sum<sig_i> / sum|sig_i|; returns 1 when ||sigma|| <= norm_floor
double tension_weight(const SymTensor& sigma, double norm_floor = 0.0);

double damage_from_k(double k, double alpha);

// ---------------------------------------------------------------------------
// crack opening / closure transitions

struct ClosureResult {
  PointState state;
  bool closed = false;
  // increment left over for the stress update when the crack closed:
  // zero by default, eps_d_old + deps under strict accounting
  SymTensor residual_deps;
};

// Advances eps_d by the strain increment while the crack is open and detects
// closure (n^T eps_d n < 0). While the crack stays open the history variable
// grows by the opening displacement <n^T deps n>. Throws contract_violation
// when called with an inactive discontinuity strain. With force the geometric
// test is skipped and the crack closes unconditionally (branch-locked solves).
ClosureResult check_crack_closure(const PointState& state, const SymTensor& deps,
                                  const IntegrationOptions& opt,
                                  bool force = false);

struct OpeningResult {
  PointState state;
  bool opened = false;
};

// Decides, after a plastic return, whether the step is absorbed as crack
// opening instead. Opening requires the projected history k + w*deps_p_max to
// pass k_c and the strain increment to open the crack (n^T deps n > 0). The
// normal n is the committed crack normal once initiated; before initiation
// the caller supplies a provisional direction (the major principal direction
// of the trial stress). On opening the increment moves into eps_d, the
// effective stress is restored to its pre-increment value, and on first
// opening the crack normal is fixed from sigma_returned. Otherwise the
// plastic update is committed. With force the criterion is skipped and the
// crack opens unconditionally (branch-locked solves).
OpeningResult check_crack_opening(const PointState& state, const SymTensor& deps,
                                  const SymTensor& deps_p,
                                  const SymTensor& sigma_returned,
                                  const ElasticModuli& em, double k_c,
                                  double sigma_y,
                                  const Eigen::Vector3d& provisional_normal,
                                  bool discontinuity_enabled,
                                  bool force = false);

// ---------------------------------------------------------------------------
// point integration

struct StepResult {
  SymTensor total_stress;
  PointState state;
};

// One strain-driven step of the full model (closure check, elastic
// predictor, plastic return, opening check, damage update, nominal stress).
StepResult integrate_point(const PointState& state, const SymTensor& deps,
                           const ElasticModuli& em, const MaterialParams& mp,
                           const DerivedParams& dp,
                           const IntegrationOptions& opt = {});

// Plane-stress wrapper: solves the out-of-plane strain increment until
// |sigma_eff_33| <= 1e-8 * sigma_y (fixed-slope elastic correction, then a
// bracketed Illinois false-position finish; solver_error when no root is
// found). deps carries the in-plane components; the converged deps_33 is
// reported so callers can keep strain bookkeeping.
StepResult integrate_point_plane_stress(const PointState& state, SymTensor deps,
                                        const ElasticModuli& em,
                                        const MaterialParams& mp,
                                        const DerivedParams& dp,
                                        const IntegrationOptions& opt = {},
                                        double* deps_zz_out = nullptr);

// ---------------------------------------------------------------------------
// consistent tangents (numerical)

// 6x6 tangent d sigma / d eps in Voigt form (engineering shear strain),
// central differences with step max(1e-8, 1e-6*||deps||) on copies of the
// state; one-sided fallback per column, solver_error when both sides fail.
Mat6 numerical_tangent(const PointState& state, const SymTensor& deps,
                       const ElasticModuli& em, const MaterialParams& mp,
                       const DerivedParams& dp,
                       const IntegrationOptions& opt = {});

// 3x3 in-plane tangent (xx, yy, xy) differenced through the plane-stress
// wrapper
Eigen::Matrix3d numerical_tangent_plane_stress(const PointState& state,
                                               const SymTensor& deps,
                                               const ElasticModuli& em,
                                               const MaterialParams& mp,
                                               const DerivedParams& dp,
                                               const IntegrationOptions& opt = {});

// nominal (damaged) stress for a given effective stress and damage
SymTensor nominal_stress(const SymTensor& sigma_eff, double d);

}  // namespace crackband
