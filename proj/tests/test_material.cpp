#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crackband/material.hpp"

using namespace crackband;

namespace {

// benchmark parameter sets used throughout the tests
MaterialParams concrete_A() {  // stiff set
  return {54000.0, 0.2, 7.2, 0.075, 0.2, 0.35};
}
MaterialParams concrete_B() {  // soft set
  return {34000.0, 0.2, 4.0, 0.09, 0.2, 0.4};
}

std::mt19937 rng(77123u);

SymTensor random_tensor(double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

// -------------------------------------------------------------------------
// independent return-mapping oracle
//
// Along the return path the stress is fully described by dgamma:
//   p(g)     = p_tr - 3 K beta g
//   s(g)     = (1 - 3 G g / q_tr) s_tr
// and the yield value f(g) = max principal of sigma(g) - sigma_y decreases
// monotonically in g. The oracle brackets the root of f on
// [0, q_tr / (3 G)] and bisects; if f is still positive at the upper bound
// (deviator exhausted) the correct answer is the apex return. This uses
// no formula from the implementation beyond the definition of the path.

struct OracleReturn {
  double dgamma = 0.0;
  bool apex = false;
  SymTensor sigma;
};

OracleReturn oracle_return_map(const SymTensor& trial, const ElasticModuli& em,
                               double sigma_y, double beta) {
  const VolDev vd = vol_dev_split(trial);
  const double q_tr = invariants(trial).q;
  const double K = em.K, G = em.G;

  const auto sigma_of = [&](double g) {
    const double p = vd.p - 3.0 * K * beta * g;
    const double scale = 1.0 - 3.0 * G * g / q_tr;
    return SymTensor::diag(p, p, p) + vd.s * scale;
  };
  const auto f_of = [&](double g) {
    return spectral_decompose(sigma_of(g)).values[0] - sigma_y;
  };

  OracleReturn out;
  const double g_hi = q_tr / (3.0 * G);
  if (f_of(g_hi) > 0.0) {
    out.apex = true;
    out.dgamma = (vd.p - sigma_y) / (3.0 * K * beta);
    out.sigma = SymTensor::diag(sigma_y, sigma_y, sigma_y);
    return out;
  }
  double lo = 0.0, hi = g_hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f_of(mid) > 0.0 ? lo : hi) = mid;
  }
  out.dgamma = 0.5 * (lo + hi);
  out.sigma = sigma_of(out.dgamma);
  return out;
}

// drives a strain path with per-component increments; returns committed
// states and keeps an exact running total of the applied strain
struct DriveLog {
  std::vector<PointState> states;
  std::vector<SymTensor> stresses;
  SymTensor eps_total;
};

DriveLog drive(const std::vector<std::pair<SymTensor, int>>& legs,
               const ElasticModuli& em, const MaterialParams& mp,
               const DerivedParams& dp, const IntegrationOptions& opt) {
  DriveLog log;
  PointState st;
  for (const auto& [target_inc, nsteps] : legs) {
    const SymTensor de = target_inc * (1.0 / nsteps);
    for (int i = 0; i < nsteps; ++i) {
      const StepResult r = integrate_point(st, de, em, mp, dp, opt);
      st = r.state;
      log.eps_total += de;
      log.states.push_back(st);
      log.stresses.push_back(r.total_stress);
    }
  }
  return log;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("softening rate calibration from the fracture energy") {
  const MaterialParams mp = concrete_A();
  SUBCASE("reference value at a 30 mm band") {
    const double alpha = derive_alpha(mp, 30.0);
    // 2*54000*30*7.2 / (2*54000*0.075 - 30*7.2^2)
    CHECK(alpha == doctest::Approx(23328000.0 / 6544.8).epsilon(1e-13));
    CHECK(alpha == doctest::Approx(3564.36).epsilon(1e-4));
  }
  SUBCASE("admissible band width is bounded") {
    const double bound = 2.0 * mp.E * mp.Gf / (mp.sigma_y * mp.sigma_y);
    CHECK(bound == doctest::Approx(156.25));
    CHECK_THROWS_AS(derive_alpha(mp, bound), config_error);
    CHECK_THROWS_AS(derive_alpha(mp, bound + 1.0), config_error);
    CHECK_NOTHROW(derive_alpha(mp, bound - 1.0));
  }
  SUBCASE("k_c reproduces the damage threshold") {
    const DerivedParams dp = derive_params(mp, 30.0);
    CHECK(dp.k_c == doctest::Approx(1.20858e-4).epsilon(1e-5));
    CHECK(damage_from_k(dp.k_c, dp.alpha) == doctest::Approx(mp.d_c).epsilon(1e-12));
  }
  SUBCASE("parameter validation names the field") {
    MaterialParams bad = mp;
    bad.d_c = 1.0;
    try {
      bad.validate();
      FAIL("expected config_error");
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find("d_c") != std::string::npos);
    }
  }
}

TEST_CASE("damage law") {
  const double alpha = derive_alpha(concrete_A(), 30.0);
  // one plastic step of 6.6667e-5 on the stiff set
  const double k = 3.6 / 54000.0;
  CHECK(damage_from_k(k, alpha) == doctest::Approx(0.2115).epsilon(1e-3));
  CHECK(damage_from_k(0.0, alpha) == 0.0);
  CHECK(damage_from_k(1e9, alpha) == doctest::Approx(1.0));
}

TEST_CASE("tension weight") {
  CHECK(tension_weight(SymTensor::diag(3.0, -1.0, 0.0)) == doctest::Approx(0.75));
  CHECK(tension_weight(SymTensor::diag(5.0, 1.0, 0.5)) == doctest::Approx(1.0));
  CHECK(tension_weight(SymTensor::diag(-5.0, -1.0, -0.5)) == doctest::Approx(0.0));
  // below the floor the state counts as fully tensile
  CHECK(tension_weight(SymTensor::diag(1e-15, 0.0, 0.0), 1e-12) == 1.0);
}

// ---------------------------------------------------------------------------

TEST_CASE("return mapping: worked uniaxial case") {
  const MaterialParams mp = concrete_B();
  const ElasticModuli em(mp.E, mp.nu);
  const SymTensor trial = SymTensor::diag(6.0, 0.0, 0.0);

  const ReturnMapResult rm = return_map(trial, em, mp.sigma_y, mp.beta);
  CHECK_FALSE(rm.apex);
  // f = 2, denominator 3*K*beta + 2*G = 11333.33 + 28333.33
  CHECK(rm.dgamma == doctest::Approx(2.0 / (11333.0 + 1.0 / 3.0 + 28333.0 + 1.0 / 3.0))
                         .epsilon(1e-9));
  // mapped stress sits on the yield surface
  CHECK(yield_value(rm.sigma, mp.sigma_y) == doctest::Approx(0.0).epsilon(1e-12));
  // stress equals trial minus the elastic image of the plastic increment
  const SymTensor recon = trial - em.apply(rm.deps_p);
  CHECK((recon - rm.sigma).norm() <= 1e-9 * trial.norm());
}

TEST_CASE("return mapping: apex return for hydrostatic trial") {
  const MaterialParams mp = concrete_B();
  const ElasticModuli em(mp.E, mp.nu);
  const SymTensor trial = SymTensor::diag(10.0, 10.0, 10.0);

  const ReturnMapResult rm = return_map(trial, em, mp.sigma_y, mp.beta);
  CHECK(rm.apex);
  CHECK(rm.sigma.xx == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rm.sigma.yy == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rm.sigma.zz == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rm.dgamma == doctest::Approx(6.0 / (3.0 * em.K * mp.beta)).epsilon(1e-12));
  // plastic increment recovers the trial exactly
  const SymTensor recon = trial - em.apply(rm.deps_p);
  CHECK((recon - rm.sigma).norm() <= 1e-9 * trial.norm());
}

TEST_CASE("return mapping: admissible trial violates the contract") {
  const MaterialParams mp = concrete_B();
  const ElasticModuli em(mp.E, mp.nu);
  CHECK_THROWS_AS(return_map(SymTensor::diag(3.9, 0.0, 0.0), em, mp.sigma_y, mp.beta),
                  contract_violation);
}

TEST_CASE("return mapping matches the bisection oracle on random trials") {
  const MaterialParams mp = concrete_B();
  const ElasticModuli em(mp.E, mp.nu);
  std::uniform_real_distribution<double> amp(0.5, 30.0);

  int tested = 0, apex_seen = 0;
  while (tested < 1000) {
    SymTensor trial = random_tensor(amp(rng));
    // bias towards tension so inadmissible trials are frequent
    const double shift = amp(rng);
    trial = trial + SymTensor::diag(shift, shift * 0.5, 0.0);
    if (yield_value(trial, mp.sigma_y) <= 0.0) continue;
    const double q_tr = invariants(trial).q;
    if (q_tr < 1e-10) continue;  // hydrostatic handled separately
    ++tested;

    const ReturnMapResult rm = return_map(trial, em, mp.sigma_y, mp.beta);
    const OracleReturn orc = oracle_return_map(trial, em, mp.sigma_y, mp.beta);

    REQUIRE(rm.apex == orc.apex);
    if (rm.apex) ++apex_seen;
    const double ref = std::max(orc.dgamma, 1e-12);
    CHECK(std::abs(rm.dgamma - orc.dgamma) <= 1e-9 * ref);
    CHECK((rm.sigma - orc.sigma).norm() <= 1e-8 * std::max(1.0, trial.norm()));

    CHECK(rm.dgamma > 0.0);
    // admissibility after the return
    CHECK(yield_value(rm.sigma, mp.sigma_y) <= 1e-9 * mp.sigma_y);
    // principal ordering is preserved
    const auto before = spectral_decompose(trial).values;
    const auto after = spectral_decompose(rm.sigma).values;
    for (int i = 0; i < 2; ++i) {
      CHECK(after[i] >= after[i + 1] - 1e-12 * std::max(1.0, trial.norm()));
    }
    (void)before;
    // elastic-plastic work balance: sigma = trial - D deps_p
    const SymTensor recon = trial - em.apply(rm.deps_p);
    CHECK((recon - rm.sigma).norm() <= 1e-9 * std::max(1.0, trial.norm()));
  }
  // the random cloud must visit both branches to be meaningful
  CHECK(apex_seen > 0);
  CHECK(apex_seen < tested);
}

TEST_CASE("return mapping is continuous at the onset of yield") {
  const MaterialParams mp = concrete_B();
  const ElasticModuli em(mp.E, mp.nu);
  const SymTensor trial = SymTensor::diag(4.0 + 1e-9, 0.5, 0.0);
  const ReturnMapResult rm = return_map(trial, em, mp.sigma_y, mp.beta);
  CHECK(rm.dgamma <= 1e-12);
  CHECK((rm.sigma - trial).norm() <= 1e-7);
}

// ---------------------------------------------------------------------------

TEST_CASE("crack closure bookkeeping") {
  const IntegrationOptions literal{};
  IntegrationOptions strict{};
  strict.strict_closure = true;

  PointState open_state;
  open_state.crack_initiated = true;
  open_state.crack_open = true;
  open_state.normal = Eigen::Vector3d::UnitX();
  open_state.eps_d = SymTensor::diag(1e-4, 0.0, 0.0);
  open_state.k = 3e-4;
  open_state.sigma_eff = SymTensor::diag(7.0, 1.0, 1.0);

  SUBCASE("opening increment keeps the crack open and grows k") {
    const SymTensor de = SymTensor::diag(2e-5, -1e-5, 0.0);
    const ClosureResult cr = check_crack_closure(open_state, de, literal);
    CHECK_FALSE(cr.closed);
    CHECK(cr.state.crack_open);
    CHECK(cr.state.eps_d.xx == doctest::Approx(1.2e-4));
    CHECK(cr.state.k == doctest::Approx(3e-4 + 2e-5));
  }
  SUBCASE("negative projection closes the crack") {
    const SymTensor de = SymTensor::diag(-1.5e-4, 0.0, 0.0);
    const ClosureResult cr = check_crack_closure(open_state, de, literal);
    CHECK(cr.closed);
    CHECK_FALSE(cr.state.crack_open);
    CHECK(cr.state.eps_d.norm() == 0.0);
    CHECK(cr.state.k == open_state.k);  // closure does not drive damage
    CHECK(cr.residual_deps.norm() == 0.0);
  }
  SUBCASE("strict accounting hands the leftover increment back") {
    const SymTensor de = SymTensor::diag(-1.5e-4, 0.0, 0.0);
    const ClosureResult cr = check_crack_closure(open_state, de, strict);
    CHECK(cr.closed);
    CHECK(cr.residual_deps.xx == doctest::Approx(-0.5e-4));
  }
  SUBCASE("only compression along the crack normal closes it") {
    // lateral compression must not close a crack opened in x
    const SymTensor de = SymTensor::diag(1e-5, -5e-4, -5e-4);
    const ClosureResult cr = check_crack_closure(open_state, de, literal);
    CHECK_FALSE(cr.closed);
  }
  SUBCASE("contract: requires an active discontinuity strain") {
    PointState closed;
    CHECK_THROWS_AS(check_crack_closure(closed, SymTensor::diag(1e-5, 0, 0), literal),
                    contract_violation);
  }
}

TEST_CASE("crack opening decision and stress reset") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  // state right below the opening threshold, at the yield surface
  PointState st;
  st.k = dp.k_c * 0.999;
  st.d = damage_from_k(st.k, dp.alpha);
  st.sigma_eff = SymTensor::diag(mp.sigma_y, 1.8, 1.8);

  const SymTensor de = SymTensor::diag(5e-5, 0.0, 0.0);
  const SymTensor trial = st.sigma_eff + em.apply(de);
  REQUIRE(yield_value(trial, mp.sigma_y) > 0.0);
  const ReturnMapResult rm = return_map(trial, em, mp.sigma_y, mp.beta);
  const Eigen::Vector3d prov = spectral_decompose(trial).dirs[0];

  SUBCASE("projected history beyond k_c opens the crack") {
    const OpeningResult op = check_crack_opening(st, de, rm.deps_p, rm.sigma, em,
                                                 dp.k_c, mp.sigma_y, prov, true);
    REQUIRE(op.opened);
    CHECK(op.state.crack_open);
    CHECK(op.state.crack_initiated);
    // increment fully absorbed by the discontinuity strain
    CHECK((op.state.eps_d - de).norm() == 0.0);
    // plastic strain untouched
    CHECK(op.state.eps_p.norm() == st.eps_p.norm());
    // stress reset restores the pre-increment state exactly
    CHECK((op.state.sigma_eff - st.sigma_eff).norm() <= 1e-9 * st.sigma_eff.norm());
    // normal fixed from the returned stress: uniaxial-dominated -> x
    CHECK(std::abs(op.state.normal.dot(Eigen::Vector3d::UnitX())) ==
          doctest::Approx(1.0).epsilon(1e-9));
    // history grows by w * max principal strain increment
    const double w = tension_weight(rm.sigma, 1e-12 * mp.sigma_y);
    CHECK(op.state.k == doctest::Approx(st.k + w * 5e-5).epsilon(1e-12));
  }
  SUBCASE("without the threshold the step stays plastic") {
    PointState young = st;
    young.k = 0.0;
    const OpeningResult op = check_crack_opening(young, de, rm.deps_p, rm.sigma,
                                                 em, dp.k_c, mp.sigma_y, prov, true);
    CHECK_FALSE(op.opened);
    CHECK((op.state.sigma_eff - rm.sigma).norm() == 0.0);
    CHECK((op.state.eps_p - rm.deps_p).norm() == 0.0);
  }
  SUBCASE("disabled discontinuity never opens") {
    const OpeningResult op = check_crack_opening(st, de, rm.deps_p, rm.sigma, em,
                                                 dp.k_c, mp.sigma_y, prov, false);
    CHECK_FALSE(op.opened);
  }
  SUBCASE("contract: crack must not be open already") {
    PointState open = st;
    open.crack_open = true;
    open.crack_initiated = true;
    open.normal = Eigen::Vector3d::UnitX();
    open.eps_d = SymTensor::diag(1e-5, 0, 0);
    CHECK_THROWS_AS(check_crack_opening(open, de, rm.deps_p, rm.sigma, em, dp.k_c,
                                        mp.sigma_y, prov, true),
                    contract_violation);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("point integration: elastic paths return the linear response") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  PointState st;
  SymTensor eps_total;
  std::uniform_real_distribution<double> u(-1e-5, 1e-5);
  for (int i = 0; i < 50; ++i) {
    const SymTensor de = random_tensor(8e-6);
    const StepResult r = integrate_point(st, de, em, mp, dp);
    st = r.state;
    eps_total += de;
    REQUIRE(yield_value(st.sigma_eff, mp.sigma_y) <= 0.0);
    CHECK(st.k == 0.0);
    CHECK(st.d == 0.0);
    // with d = 0 the nominal stress is the elastic image of the total strain
    CHECK((r.total_stress - em.apply(eps_total)).norm() <=
          1e-12 * std::max(1.0, r.total_stress.norm()));
  }
}

TEST_CASE("point integration: worked plastic-damage step") {
  // uniaxial-strain tension on the stiff set, one step past yield
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  PointState st;
  const SymTensor de = SymTensor::diag(2.0e-4, 0.0, 0.0);
  const StepResult r = integrate_point(st, de, em, mp, dp);

  // trial sigma_xx = (lambda + 2G) * 2e-4 = 12 > sigma_y
  CHECK(r.state.k > 0.0);
  CHECK(r.state.d > 0.0);
  CHECK(r.state.d == doctest::Approx(damage_from_k(r.state.k, dp.alpha)));
  CHECK(yield_value(r.state.sigma_eff, mp.sigma_y) <= 1e-9 * mp.sigma_y);
  // tensile damage reduces the axial component
  CHECK(r.total_stress.xx < r.state.sigma_eff.xx);
}

TEST_CASE("point integration: cyclic opening, closure and reopening") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);
  IntegrationOptions strict;
  strict.strict_closure = true;

  // uniaxial-strain cycle: deep tension, compression to closure, re-tension
  const std::vector<std::pair<SymTensor, int>> legs = {
      {SymTensor::diag(6e-4, 0, 0), 120},
      {SymTensor::diag(-7e-4, 0, 0), 140},
      {SymTensor::diag(7e-4, 0, 0), 140},
  };
  const DriveLog log = drive(legs, em, mp, dp, strict);

  bool opened = false, closed_again = false, reopened = false;
  double k_prev = 0.0;
  SymTensor eps_applied;
  int idx = 0;
  const SymTensor de0 = legs[0].first * (1.0 / legs[0].second);

  Eigen::Vector3d first_normal = Eigen::Vector3d::Zero();
  for (const auto& st : log.states) {
    // history never decreases, damage tracks it exactly
    CHECK(st.k >= k_prev);
    k_prev = st.k;
    CHECK(st.d == doctest::Approx(damage_from_k(st.k, dp.alpha)));
    // effective stress stays admissible
    CHECK(yield_value(st.sigma_eff, mp.sigma_y) <= 1e-9 * mp.sigma_y);
    // the crack, once initiated, keeps its normal
    if (st.crack_initiated) {
      if (first_normal.norm() == 0.0) first_normal = st.normal;
      CHECK((st.normal - first_normal).norm() == 0.0);
      // never interpenetrates
      if (st.crack_open)
        CHECK(normal_projection(st.eps_d, st.normal) >= -1e-15);
    } else {
      CHECK(st.eps_d.norm() == 0.0);
    }
    if (!opened && st.crack_open) opened = true;
    if (opened && !closed_again && !st.crack_open) closed_again = true;
    if (closed_again && st.crack_open) reopened = true;
    ++idx;
  }
  CHECK(opened);
  CHECK(closed_again);
  CHECK(reopened);
  (void)de0;

  // strict accounting keeps the strain decomposition exact at every step
  SymTensor eps_run;
  size_t i = 0;
  for (const auto& [inc, n] : legs) {
    const SymTensor de = inc * (1.0 / n);
    for (int s = 0; s < n; ++s, ++i) {
      eps_run += de;
      const PointState& st = log.states[i];
      const SymTensor eps_e = em.apply_inverse(st.sigma_eff);
      const SymTensor recon = eps_e + st.eps_p + st.eps_d;
      CHECK((recon - eps_run).norm() <= 1e-9);
    }
  }
}

TEST_CASE("point integration: open crack freezes the effective stress") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  PointState st;
  // drive monotonically until the crack opens
  const SymTensor de = SymTensor::diag(5e-6, 0, 0);
  int guard = 0;
  while (!st.crack_open && guard++ < 500)
    st = integrate_point(st, de, em, mp, dp).state;
  REQUIRE(st.crack_open);

  const SymTensor frozen = st.sigma_eff;
  for (int i = 0; i < 20; ++i) {
    const StepResult r = integrate_point(st, de, em, mp, dp);
    st = r.state;
    REQUIRE(st.crack_open);
    CHECK((st.sigma_eff - frozen).norm() == 0.0);
    // nominal stress keeps decaying through growing damage
    CHECK(r.total_stress.xx <= (1.0 - st.d) * frozen.xx + 1e-12);
  }
}

TEST_CASE("point integration: disabled discontinuity reduces to plastic damage") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);
  IntegrationOptions off;
  off.discontinuity_enabled = false;

  PointState st;
  const SymTensor de = SymTensor::diag(5e-6, 0, 0);
  for (int i = 0; i < 400; ++i) st = integrate_point(st, de, em, mp, dp, off).state;
  CHECK(st.eps_d.norm() == 0.0);
  CHECK_FALSE(st.crack_open);
  CHECK(st.k > dp.k_c);  // well past the threshold, still no opening
}

TEST_CASE("point integration rejects non-finite increments") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);
  SymTensor bad = SymTensor::diag(1e-4, 0, 0);
  bad.yz = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(integrate_point(PointState{}, bad, em, mp, dp),
                  invalid_input_error);
}

// ---------------------------------------------------------------------------

TEST_CASE("plane stress: elastic closed form for the thickness strain") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  SymTensor de;
  de.xx = 6e-5;
  de.yy = 2e-5;
  de.xy = 1.5e-5;
  double dezz = 0.0;
  const StepResult r =
      integrate_point_plane_stress(PointState{}, de, em, mp, dp, {}, &dezz);

  const double expect = -mp.nu / (1.0 - mp.nu) * (de.xx + de.yy);
  CHECK(dezz == doctest::Approx(expect).epsilon(1e-10));
  CHECK(std::abs(r.state.sigma_eff.zz) <= 1e-8 * mp.sigma_y);

  // in-plane response matches the condensed plane-stress stiffness
  const double c = mp.E / (1.0 - mp.nu * mp.nu);
  CHECK(r.total_stress.xx == doctest::Approx(c * (de.xx + mp.nu * de.yy)).epsilon(1e-10));
  CHECK(r.total_stress.yy == doctest::Approx(c * (de.yy + mp.nu * de.xx)).epsilon(1e-10));
  CHECK(r.total_stress.xy == doctest::Approx(2.0 * em.G * de.xy).epsilon(1e-10));
}

TEST_CASE("plane stress: thickness stress stays within tolerance through plasticity") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  PointState st;
  SymTensor de;
  de.xx = 3e-5;
  de.yy = 0.5e-5;
  de.xy = 1e-5;
  for (int i = 0; i < 60; ++i) {
    const StepResult r = integrate_point_plane_stress(st, de, em, mp, dp);
    st = r.state;
    CHECK(std::abs(st.sigma_eff.zz) <= 1e-8 * mp.sigma_y);
  }
  CHECK(st.k > 0.0);  // the path did yield
}

TEST_CASE("plane stress: crack-open steps exit immediately with frozen stress") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  PointState st;
  SymTensor de;
  de.xx = 8e-6;
  int guard = 0;
  while (!st.crack_open && guard++ < 1000)
    st = integrate_point_plane_stress(st, de, em, mp, dp).state;
  REQUIRE(st.crack_open);

  const SymTensor frozen = st.sigma_eff;
  const StepResult r = integrate_point_plane_stress(st, de, em, mp, dp);
  CHECK((r.state.sigma_eff - frozen).norm() == 0.0);
}

// ---------------------------------------------------------------------------

TEST_CASE("numerical tangent: elastic limit recovers the elastic operator") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  const SymTensor de = SymTensor::diag(3e-5, -1e-5, 0.5e-5);
  const Mat6 C = numerical_tangent(PointState{}, de, em, mp, dp);
  CHECK((C - em.D).norm() <= 1e-6 * em.D.norm());
}

TEST_CASE("numerical tangent: predicts the stress change across plastic steps") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  // a committed plastic state
  PointState st;
  st = integrate_point(st, SymTensor::diag(1.6e-4, 0, 0), em, mp, dp).state;
  REQUIRE(st.k > 0.0);

  const SymTensor de = SymTensor::diag(2e-5, 1e-6, 0);
  const Mat6 C = numerical_tangent(st, de, em, mp, dp);

  // directional check: C * delta matches the actual stress difference
  const SymTensor probe = SymTensor::diag(1e-8, 0.4e-8, 0.2e-8);
  const SymTensor s1 =
      integrate_point(st, de + probe, em, mp, dp).total_stress;
  const SymTensor s0 = integrate_point(st, de, em, mp, dp).total_stress;
  const Vec6 predicted = C * probe.to_voigt_strain();
  const Vec6 actual = s1.to_voigt_stress() - s0.to_voigt_stress();
  CHECK((predicted - actual).norm() <= 2e-4 * actual.norm() + 1e-12);
}

TEST_CASE("numerical tangent leaves the caller state untouched") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  PointState st;
  st = integrate_point(st, SymTensor::diag(1.6e-4, 0, 0), em, mp, dp).state;
  const PointState before = st;
  (void)numerical_tangent(st, SymTensor::diag(1e-5, 0, 0), em, mp, dp);
  CHECK((st.sigma_eff - before.sigma_eff).norm() == 0.0);
  CHECK(st.k == before.k);
  CHECK(st.eps_p.ddot(st.eps_p) == before.eps_p.ddot(before.eps_p));
}

TEST_CASE("plane-stress tangent: elastic limit recovers the condensed operator") {
  const MaterialParams mp = concrete_A();
  const ElasticModuli em(mp.E, mp.nu);
  const DerivedParams dp = derive_params(mp, 30.0);

  SymTensor de;
  de.xx = 2e-5;
  de.yy = -1e-5;
  de.xy = 0.5e-5;
  const Eigen::Matrix3d C =
      numerical_tangent_plane_stress(PointState{}, de, em, mp, dp);

  Eigen::Matrix3d Dps;
  const double c = mp.E / (1.0 - mp.nu * mp.nu);
  Dps << c, c * mp.nu, 0.0, c * mp.nu, c, 0.0, 0.0, 0.0, em.G;
  CHECK((C - Dps).norm() <= 1e-6 * Dps.norm());
}
