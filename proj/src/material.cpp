// Point-level implementation of the plastic-damage model with discontinuity
// strain: parameter derivation, explicit return mapping, damage evolution,
// crack opening/closure transitions, plane-stress condensation and the
// finite-difference consistent tangents.

#include "crackband/material.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace crackband {

// ---------------------------------------------------------------------------
// parameters

void MaterialParams::validate() const {
  std::ostringstream msg;
  if (!(E > 0.0))
    msg << "material.E must be positive (got " << E << ")";
  else if (!(nu >= 0.0 && nu < 0.5))
    msg << "material.nu must lie in [0, 0.5) (got " << nu << ")";
  else if (!(sigma_y > 0.0))
    msg << "material.sigma_y must be positive (got " << sigma_y << ")";
  else if (!(Gf > 0.0))
    msg << "material.Gf must be positive (got " << Gf << ")";
  else if (!(beta >= 0.0))
    msg << "material.beta must be non-negative (got " << beta << ")";
  else if (!(d_c > 0.0 && d_c < 1.0))
    msg << "material.d_c must lie in (0, 1) (got " << d_c << ")";
  else
    return;
  throw config_error(msg.str());
}

double derive_alpha(const MaterialParams& mp, double ell) {
  if (!(ell > 0.0))
    throw config_error("characteristic length must be positive");
  const double bound = 2.0 * mp.E * mp.Gf / (mp.sigma_y * mp.sigma_y);
  const double denom = 2.0 * mp.E * mp.Gf - ell * mp.sigma_y * mp.sigma_y;
  if (!(denom > 0.0)) {
    std::ostringstream msg;
    msg << "characteristic length " << ell
        << " mm exceeds the admissible bound 2*E*Gf/sigma_y^2 = " << bound
        << " mm (snap-back in the band)";
    throw config_error(msg.str());
  }
  return 2.0 * mp.E * ell * mp.sigma_y / denom;
}

double derive_kc(double alpha, double d_c) {
  return -std::log(1.0 - d_c) / alpha;
}

DerivedParams derive_params(const MaterialParams& mp, double ell) {
  DerivedParams dp;
  dp.ell = ell;
  dp.alpha = derive_alpha(mp, ell);
  dp.k_c = derive_kc(dp.alpha, mp.d_c);
  return dp;
}

// ---------------------------------------------------------------------------
// plasticity

double yield_value(const SymTensor& sigma, double sigma_y) {
  return spectral_decompose(sigma).values[0] - sigma_y;
}

ReturnMapResult return_map(const SymTensor& trial, const ElasticModuli& em,
                           double sigma_y, double beta) {
  const Spectral sp = spectral_decompose(trial);
  const double f_tr = sp.values[0] - sigma_y;
  if (!(f_tr > 0.0))
    throw contract_violation("return_map: trial state is admissible");

  const VolDev vd = vol_dev_split(trial);
  const double p_tr = vd.p;
  const double q_tr = invariants(trial).q;
  const double K = em.K, G = em.G;

  ReturnMapResult out;
  bool apex = q_tr < 1e-12 * sigma_y;  // (near-)hydrostatic trial
  double dgamma = 0.0;
  if (!apex) {
    // f is linear in dgamma along the return direction; its exact root
    dgamma = f_tr / (3.0 * K * beta + 3.0 * G * (sp.values[0] - p_tr) / q_tr);
    // the deviator shrinks by 3 G dgamma; past this bound only the apex is left
    apex = dgamma > q_tr / (3.0 * G);
  }

  if (apex) {
    out.apex = true;
    out.dgamma = (p_tr - sigma_y) / (3.0 * K * beta);
    out.sigma = SymTensor::diag(sigma_y, sigma_y, sigma_y);
    out.deps_p =
        SymTensor::diag(1.0, 1.0, 1.0) * ((p_tr - sigma_y) / (3.0 * K)) +
        vd.s * (1.0 / (2.0 * G));
    return out;
  }

  out.apex = false;
  out.dgamma = dgamma;
  const double p_new = p_tr - 3.0 * K * dgamma * beta;
  const double scale = 1.0 - 3.0 * G * dgamma / q_tr;  // = q_new / q_tr >= 0
  const SymTensor s_new = vd.s * scale;
  out.sigma = SymTensor::diag(p_new, p_new, p_new) + s_new;
  // flow direction beta*I + 3/2 s/q, with s/q unchanged along the return path
  out.deps_p = SymTensor::diag(beta, beta, beta) * dgamma +
               vd.s * (1.5 * dgamma / q_tr);
  return out;
}

// ---------------------------------------------------------------------------
// damage

double tension_weight(const SymTensor& sigma, double norm_floor) {
  if (sigma.norm() <= norm_floor) return 1.0;
  const Spectral sp = spectral_decompose(sigma);
  double pos = 0.0, tot = 0.0;
  for (double v : sp.values) {
    pos += macaulay(v);
    tot += std::abs(v);
  }
  if (tot == 0.0) return 1.0;
  return pos / tot;
}

double damage_from_k(double k, double alpha) {
  return -std::expm1(-alpha * k);
}

SymTensor nominal_stress(const SymTensor& sigma_eff, double d) {
  // damage acts on the tensile part only; the compressive remainder keeps
  // the full stiffness
  return sigma_eff - tensile_part(sigma_eff) * d;
}

// ---------------------------------------------------------------------------
// crack opening / closure

ClosureResult check_crack_closure(const PointState& state, const SymTensor& deps,
                                  const IntegrationOptions& opt, bool force) {
  if (!state.crack_open)
    throw contract_violation("check_crack_closure: discontinuity strain inactive");

  ClosureResult out;
  out.state = state;
  const SymTensor eps_d_new = state.eps_d + deps;
  if (force || normal_projection(eps_d_new, state.normal) < 0.0) {
    // crack closes: deactivate the discontinuity strain
    out.state.eps_d = SymTensor::zero();
    out.state.crack_open = false;
    out.closed = true;
    // in strict accounting the leftover increment re-enters the stress
    // update; by default it is consumed with the closure
    out.residual_deps = opt.strict_closure ? eps_d_new : SymTensor::zero();
  } else {
    out.state.eps_d = eps_d_new;
    out.state.k += macaulay(normal_projection(deps, state.normal));
  }
  return out;
}

OpeningResult check_crack_opening(const PointState& state, const SymTensor& deps,
                                  const SymTensor& deps_p,
                                  const SymTensor& sigma_returned,
                                  const ElasticModuli& em, double k_c,
                                  double sigma_y,
                                  const Eigen::Vector3d& provisional_normal,
                                  bool discontinuity_enabled, bool force) {
  if (state.crack_open)
    throw contract_violation("check_crack_opening: discontinuity strain already active");

  OpeningResult out;
  out.state = state;

  // tension fraction and normal are taken from the returned effective
  // stress before any reset
  const double w = tension_weight(sigma_returned, 1e-12 * sigma_y);
  const double deps_p_max = spectral_decompose(deps_p).values[0];
  const Eigen::Vector3d n_eval =
      state.crack_initiated ? state.normal : provisional_normal;

  const bool opens = force || (discontinuity_enabled &&
                               state.k + w * deps_p_max > k_c &&
                               normal_projection(deps, n_eval) > 0.0);

  if (!opens) {
    out.state.eps_p += deps_p;
    out.state.sigma_eff = sigma_returned;
    out.state.k += w * deps_p_max;
    return out;
  }

  out.opened = true;
  // the whole increment becomes crack opening; the stress update is undone,
  // which restores exactly the effective stress before this increment
  out.state.eps_d = deps;
  out.state.crack_open = true;
  out.state.sigma_eff = sigma_returned - em.apply(deps - deps_p);
  // the criterion guarantees a positive opening; the bracket only guards
  // forced transitions against decreasing the history variable
  out.state.k += w * macaulay(spectral_decompose(deps).values[0]);
  if (!state.crack_initiated) {
    out.state.crack_initiated = true;
    out.state.normal = spectral_decompose(sigma_returned).dirs[0];
  }
  return out;
}

// ---------------------------------------------------------------------------
// point integration

StepResult integrate_point(const PointState& state, const SymTensor& deps,
                           const ElasticModuli& em, const MaterialParams& mp,
                           const DerivedParams& dp,
                           const IntegrationOptions& opt) {
  if (!deps.finite())
    throw invalid_input_error("integrate_point: non-finite strain increment");

  PointState st = state;
  SymTensor eff = deps;       // increment entering the stress update
  bool update_stress = true;
  // a closed point locked onto the open branch makes the opening transition
  // regardless of the criterion (see BranchLock)
  const bool force_open =
      !st.crack_open && opt.branch_lock == BranchLock::stay_open;

  if (st.crack_open) {
    if (opt.branch_lock == BranchLock::stay_open) {
      // locked onto the open branch: absorb the increment without testing
      // for closure (candidate evaluation only, see BranchLock)
      st.eps_d += deps;
      st.k += macaulay(normal_projection(deps, st.normal));
      update_stress = false;
    } else {
      // under stay_closed an open crack is pressed shut unconditionally
      const bool force_close = opt.branch_lock == BranchLock::stay_closed;
      const ClosureResult cr = check_crack_closure(st, deps, opt, force_close);
      st = cr.state;
      if (cr.closed) {
        eff = cr.residual_deps;
      } else {
        update_stress = false;  // increment absorbed by the open crack
      }
    }
  }

  if (update_stress) {
    const SymTensor trial = st.sigma_eff + em.apply(eff);
    const bool plastic = yield_value(trial, mp.sigma_y) > 0.0;
    if (plastic || force_open) {
      // a forced opening can start from an elastic trial; the opening
      // rollback then restores the pre-increment effective stress exactly
      // and only the damage history advances
      ReturnMapResult rm;
      if (plastic) {
        rm = return_map(trial, em, mp.sigma_y, mp.beta);
      } else {
        rm.sigma = trial;
        rm.deps_p = SymTensor::zero();
      }
      // before initiation the opening direction is probed on the trial state
      const Eigen::Vector3d prov = st.crack_initiated
                                       ? st.normal
                                       : spectral_decompose(trial).dirs[0];
      const bool may_open = opt.discontinuity_enabled &&
                            opt.branch_lock != BranchLock::stay_closed;
      const OpeningResult op =
          check_crack_opening(st, eff, rm.deps_p, rm.sigma, em, dp.k_c,
                              mp.sigma_y, prov, may_open, force_open);
      st = op.state;
    } else {
      st.sigma_eff = trial;
    }
  }

  st.d = damage_from_k(st.k, dp.alpha);
  return {nominal_stress(st.sigma_eff, st.d), st};
}

StepResult integrate_point_plane_stress(const PointState& state, SymTensor deps,
                                        const ElasticModuli& em,
                                        const MaterialParams& mp,
                                        const DerivedParams& dp,
                                        const IntegrationOptions& opt,
                                        double* deps_zz_out) {
  if (!deps.finite())
    throw invalid_input_error("plane stress step: non-finite strain increment");

  const double tol = 1e-8 * mp.sigma_y;
  const double D33 = em.lambda + 2.0 * em.G;
  // out-of-plane increment that would zero sigma_zz elastically
  double dezz =
      -(state.sigma_eff.zz + em.lambda * (deps.xx + deps.yy)) / D33;

  StepResult res;
  double s33 = 0.0;
  const auto eval = [&](double z) {
    deps.zz = z;
    res = integrate_point(state, deps, em, mp, dp, opt);
    s33 = res.state.sigma_eff.zz;
  };

  // Fixed-slope correction with the elastic modulus: exact when the point
  // responds elastically in zz.  When the return map caps the out-of-plane
  // stress at the yield surface, sigma_zz barely follows dezz and this
  // iteration crawls, so after a few steps the root is bracketed (reusing
  // the sign change when the fixed-slope pass produced one, by geometric
  // expansion otherwise — sigma_zz is continuous in dezz and turns
  // compressive for large negative increments) and finished below.
  eval(dezz);
  double a = 0.0, sa = 0.0, b = 0.0, sb = 0.0;
  bool bracketed = false;
  for (int it = 0; it < 8 && std::abs(s33) > tol; ++it) {
    const double z_prev = dezz, s_prev = s33;
    dezz -= s33 / D33;
    eval(dezz);
    if (s_prev * s33 < 0.0) {
      a = z_prev;
      sa = s_prev;
      b = dezz;
      sb = s33;
      bracketed = true;
      break;
    }
  }
  if (!bracketed && std::abs(s33) > tol) {
    double step = -s33 / D33;
    if (std::abs(step) < 1e-16) step = s33 > 0.0 ? -1e-16 : 1e-16;
    a = dezz;
    sa = s33;
    for (int k = 0; k < 60; ++k) {
      dezz = a + step;
      eval(dezz);
      if (sa * s33 <= 0.0) {
        b = dezz;
        sb = s33;
        bracketed = true;
        break;
      }
      a = dezz;
      sa = s33;
      step *= 2.0;
    }
  }
  // Illinois false position on the bracket: the secant step homes in
  // superlinearly where the response is smooth, and halving the retained
  // endpoint's value keeps the interpolant moving across yield plateaus
  // where plain bisection needs dozens of cuts and plain secant stalls.
  if (bracketed) {
    for (int k = 0; k < 80 && std::abs(s33) > tol; ++k) {
      double z = (a * sb - b * sa) / (sb - sa);
      const double lo = std::min(a, b), hi = std::max(a, b);
      if (!(z > lo && z < hi)) z = 0.5 * (a + b);
      eval(z);
      dezz = z;
      if (sa * s33 <= 0.0) {
        b = z;
        sb = s33;
        sa *= 0.5;
      } else {
        a = z;
        sa = s33;
        sb *= 0.5;
      }
      if (std::abs(b - a) <= 1e-18 + 4e-16 * std::abs(b)) break;
    }
  }
  if (std::abs(s33) <= tol) {
    if (deps_zz_out) *deps_zz_out = dezz;
    return res;
  }
  std::ostringstream msg;
  msg << "plane stress iteration did not converge: |sigma_zz| = "
      << std::abs(s33) << " > " << tol;
  throw solver_error(msg.str());
}

// ---------------------------------------------------------------------------
// numerical tangents

namespace {

// shared central/one-sided differencing over an arbitrary stress functional
template <typename StressFn>
void fd_column(const StressFn& stress_of, const Eigen::VectorXd& base_probe,
               int j, double h, std::optional<Eigen::VectorXd>& base_stress,
               Eigen::Ref<Eigen::VectorXd> col) {
  Eigen::VectorXd vp = base_probe, vm = base_probe;
  vp(j) += h;
  vm(j) -= h;
  std::optional<Eigen::VectorXd> sp, sm;
  try {
    sp = stress_of(vp);
  } catch (const error&) {
  }
  try {
    sm = stress_of(vm);
  } catch (const error&) {
  }
  if (sp && sm) {
    col = (*sp - *sm) / (2.0 * h);
    return;
  }
  if (!base_stress && (sp || sm)) base_stress = stress_of(base_probe);
  if (sp) {
    col = (*sp - *base_stress) / h;
    return;
  }
  if (sm) {
    col = (*base_stress - *sm) / h;
    return;
  }
  throw solver_error("consistent tangent: probe failed in both directions");
}

}  // namespace

Mat6 numerical_tangent(const PointState& state, const SymTensor& deps,
                       const ElasticModuli& em, const MaterialParams& mp,
                       const DerivedParams& dp, const IntegrationOptions& opt) {
  const double h = std::max(1e-8, 1e-6 * deps.norm());
  const auto stress_of = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    const SymTensor de = SymTensor::from_voigt_strain(v);
    return integrate_point(state, de, em, mp, dp, opt)
        .total_stress.to_voigt_stress();
  };
  Eigen::VectorXd base = deps.to_voigt_strain();
  std::optional<Eigen::VectorXd> base_stress;
  Mat6 C;
  Eigen::VectorXd col(6);
  for (int j = 0; j < 6; ++j) {
    fd_column(stress_of, base, j, h, base_stress, col);
    C.col(j) = col;
  }
  return C;
}

Eigen::Matrix3d numerical_tangent_plane_stress(const PointState& state,
                                               const SymTensor& deps,
                                               const ElasticModuli& em,
                                               const MaterialParams& mp,
                                               const DerivedParams& dp,
                                               const IntegrationOptions& opt) {
  const double h = std::max(1e-8, 1e-6 * deps.norm());
  // probe vector carries (d_eps_xx, d_eps_yy, gamma_xy)
  const auto stress_of = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    SymTensor de;
    de.xx = v(0);
    de.yy = v(1);
    de.xy = 0.5 * v(2);
    const StepResult r =
        integrate_point_plane_stress(state, de, em, mp, dp, opt);
    Eigen::VectorXd s(3);
    s << r.total_stress.xx, r.total_stress.yy, r.total_stress.xy;
    return s;
  };
  Eigen::VectorXd base(3);
  base << deps.xx, deps.yy, 2.0 * deps.xy;
  std::optional<Eigen::VectorXd> base_stress;
  Eigen::Matrix3d C;
  Eigen::VectorXd col(3);
  for (int j = 0; j < 3; ++j) {
    fd_column(stress_of, base, j, h, base_stress, col);
    C.col(j) = col;
  }
  return C;
}

}  // namespace crackband
