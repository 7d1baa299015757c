// Finite element harness checks: patch tests, characteristic lengths,
// elastic reaction slopes, consistent-tangent/internal-force agreement,
// stepping, cut-back and abort behaviour, snapshots and determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crackband/fem.hpp"
#include "crackband/meshgen.hpp"

using namespace crackband;

namespace {

MaterialParams concrete_A() {
  MaterialParams mp;
  mp.E = 54000.0;
  mp.nu = 0.2;
  mp.sigma_y = 7.2;
  mp.Gf = 0.075;
  mp.beta = 0.2;
  mp.d_c = 0.35;
  return mp;
}

// unit-height strip in uniaxial tension: bottom held, top driven upward,
// one corner pinned laterally
std::vector<Constraint> strip_constraints() {
  return {{"bottom", 1, 0.0}, {"bottom_left", 0, 0.0}, {"top", 1, 1.0}};
}

LoadProgram ramp_to(double u_end, double initial = 0.05) {
  LoadProgram p;
  p.schedule = {{0.0, 0.0}, {1.0, u_end}};
  p.initial_increment = initial;
  return p;
}

// per-node sets and pinned-value constraints for a prescribed boundary field
void prescribe_nodes(Mesh& mesh, const std::vector<int>& nodes,
                     const std::function<std::array<double, 2>(double, double)>& field,
                     std::vector<Constraint>& constraints) {
  for (int n : nodes) {
    const std::string set = "pin" + std::to_string(n);
    mesh.node_sets[set] = {n};
    const auto u = field(mesh.nodes[n][0], mesh.nodes[n][1]);
    constraints.push_back({set, 0, u[0]});
    constraints.push_back({set, 1, u[1]});
  }
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("characteristic element length") {
  SUBCASE("unit square quadrilateral") {
    Mesh m = rect_mesh(1.0, 1.0, 1, 1, 3.0);  // thickness must not leak in
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    CHECK(solver.char_length(0) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("right triangle with legs 3 and 4") {
    Mesh m;
    m.nodes = {{0.0, 0.0}, {3.0, 0.0}, {0.0, 4.0}};
    m.elems = {{0, 1, 2, -1}};
    m.node_sets["bottom"] = {0, 1};
    m.node_sets["bottom_left"] = {0};
    m.node_sets["top"] = {2};
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    CHECK(solver.char_length(0) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-12));
  }

  SUBCASE("global override replaces every element length") {
    Mesh m = rect_mesh(2.0, 1.0, 2, 1);
    SolverSettings s;
    s.ell_override = 2.0;
    FemSolver solver(m, concrete_A(), s, strip_constraints(), {});
    CHECK(solver.char_length(0) == doctest::Approx(2.0));
    CHECK(solver.char_length(1) == doctest::Approx(2.0));
    CHECK(solver.elem_params()[0].alpha ==
          doctest::Approx(derive_params(concrete_A(), 2.0).alpha));
  }

  SUBCASE("elements beyond the admissible band width are rejected by id") {
    Mesh m = rect_mesh(400.0, 200.0, 2, 1);  // 200 mm cells, bound is 156.25
    try {
      FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
      FAIL("expected config_error");
    } catch (const config_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("band width validation failed for 2 element(s)") !=
            std::string::npos);
      CHECK(msg.find("0, 1") != std::string::npos);
      CHECK(msg.find("admissible bound") != std::string::npos);
    }
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("patch test: linear fields are reproduced exactly") {
  // exact linear displacement field, strains well inside the elastic domain
  const double a0 = 2e-5, a1 = 4e-5, a2 = 1e-5;
  const double b0 = -1e-5, b1 = 1.5e-5, b2 = 2.5e-5;
  const auto field = [&](double x, double y) -> std::array<double, 2> {
    return {a0 + a1 * x + a2 * y, b0 + b1 * x + b2 * y};
  };

  SUBCASE("distorted quadrilaterals, plane stress") {
    Mesh m = rect_mesh(1.0, 1.0, 3, 3);
    // push the four interior nodes off the regular grid
    for (int n = 0; n < m.n_nodes(); ++n) {
      const double x = m.nodes[n][0], y = m.nodes[n][1];
      if (x > 1e-9 && x < 1.0 - 1e-9 && y > 1e-9 && y < 1.0 - 1e-9) {
        m.nodes[n][0] += 0.04 * std::sin(3.0 * n);
        m.nodes[n][1] -= 0.05 * std::cos(2.0 * n);
      }
    }
    m.node_sets.clear();
    std::vector<int> boundary, interior;
    for (int n = 0; n < m.n_nodes(); ++n) {
      const double x = m.nodes[n][0], y = m.nodes[n][1];
      const bool onb = x < 1e-9 || x > 1.0 - 1e-9 || y < 1e-9 || y > 1.0 - 1e-9;
      (onb ? boundary : interior).push_back(n);
    }
    std::vector<Constraint> constraints;
    prescribe_nodes(m, boundary, field, constraints);

    FemSolver solver(m, concrete_A(), {}, constraints, {});
    const RunResult res = solver.run_program(ramp_to(1.0, 1.0));
    REQUIRE(!res.aborted);

    const auto& u = solver.displacements();
    for (int n : interior) {
      const auto ue = field(m.nodes[n][0], m.nodes[n][1]);
      CHECK(std::abs(u(2 * n) - ue[0]) < 1e-13);
      CHECK(std::abs(u(2 * n + 1) - ue[1]) < 1e-13);
    }

    // constant stress across every integration point (plane stress)
    const double c = 54000.0 / (1.0 - 0.04);
    const double sxx = c * (a1 + 0.2 * b2);
    const double syy = c * (b2 + 0.2 * a1);
    const double sxy = (54000.0 / 2.4) * (a2 + b1);  // G * gamma  // G * gamma / ...
    for (const auto& st : solver.states()) {
      CHECK(st.sigma_eff.xx == doctest::Approx(sxx).epsilon(1e-9));
      CHECK(st.sigma_eff.yy == doctest::Approx(syy).epsilon(1e-9));
      CHECK(st.sigma_eff.xy == doctest::Approx(sxy).epsilon(1e-9));
      CHECK(std::abs(st.sigma_eff.zz) < 1e-9);
      CHECK(st.k == 0.0);
      CHECK(st.d == 0.0);
    }
  }

  SUBCASE("triangle fan, plane strain") {
    Mesh m;
    m.nodes = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {0.63, 0.44}};
    m.elems = {{0, 1, 4, -1}, {1, 2, 4, -1}, {2, 3, 4, -1}, {3, 0, 4, -1}};
    std::vector<Constraint> constraints;
    prescribe_nodes(m, {0, 1, 2, 3}, field, constraints);

    SolverSettings s;
    s.plane_stress = false;
    FemSolver solver(m, concrete_A(), s, constraints, {});
    const RunResult res = solver.run_program(ramp_to(1.0, 1.0));
    REQUIRE(!res.aborted);

    const auto& u = solver.displacements();
    const auto ue = field(0.63, 0.44);
    CHECK(std::abs(u(8) - ue[0]) < 1e-13);
    CHECK(std::abs(u(9) - ue[1]) < 1e-13);

    // plane strain keeps the out-of-plane stress at nu * (sxx + syy)
    ElasticModuli em(54000.0, 0.2);
    const double sxx = (em.lambda + 2.0 * em.G) * a1 + em.lambda * b2;
    const double syy = (em.lambda + 2.0 * em.G) * b2 + em.lambda * a1;
    const double szz = em.lambda * (a1 + b2);
    for (const auto& st : solver.states()) {
      CHECK(st.sigma_eff.xx == doctest::Approx(sxx).epsilon(1e-9));
      CHECK(st.sigma_eff.yy == doctest::Approx(syy).epsilon(1e-9));
      CHECK(st.sigma_eff.zz == doctest::Approx(szz).epsilon(1e-9));
    }
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("elastic reaction slopes and linearity") {
  Mesh m = rect_mesh(1.0, 1.0, 1, 1);

  SUBCASE("plane stress: uniaxial modulus E") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(1e-5, 0.25));
    REQUIRE(!res.aborted);
    double fmax = 0.0;
    for (const auto& r : res.curve) fmax = std::max(fmax, std::abs(r.reaction));
    for (const auto& r : res.curve) {
      // driven upward: the reaction is the negated internal-force sum
      CHECK(std::abs(r.reaction - (-54000.0 * r.u_control)) <= 1e-9 * fmax);
    }
  }

  SUBCASE("plane strain: in-plane uniaxial modulus E / (1 - nu^2)") {
    SolverSettings s;
    s.plane_stress = false;
    FemSolver solver(m, concrete_A(), s, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(1e-5, 0.5));
    REQUIRE(!res.aborted);
    const auto& last = res.curve.back();
    CHECK(last.reaction ==
          doctest::Approx(-54000.0 / (1.0 - 0.04) * 1e-5).epsilon(1e-9));
  }

  SUBCASE("thickness scales the reaction") {
    Mesh mt = rect_mesh(1.0, 1.0, 1, 1, 100.0);
    FemSolver solver(mt, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(1e-5, 1.0));
    REQUIRE(!res.aborted);
    CHECK(res.curve.back().reaction ==
          doctest::Approx(-54000.0 * 1e-5 * 100.0).epsilon(1e-9));
  }
}

// ---------------------------------------------------------------------------

namespace {

// directional finite-difference check of the assembled tangent at u1; probes
// every dof, so constrained rows and the damage-normal direction are covered
void check_tangent_direction(FemSolver& solver, const Eigen::VectorXd& u1,
                             double tol_rel) {
  Eigen::VectorXd f0;
  Eigen::SparseMatrix<double> K;
  solver.assemble(u1, f0, &K);

  std::mt19937 rng(20240818);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(solver.n_dofs());
  for (int d = 0; d < solver.n_dofs(); ++d) v(d) = dist(rng);
  v /= v.norm();

  const double h = 1e-10;
  Eigen::VectorXd fp, fm;
  solver.assemble(u1 + h * v, fp, nullptr);
  solver.assemble(u1 - h * v, fm, nullptr);

  const Eigen::VectorXd kv = K * v;
  const Eigen::VectorXd fd = (fp - fm) / (2.0 * h);
  REQUIRE(kv.norm() > 0.0);
  CHECK((kv - fd).norm() <= tol_rel * kv.norm());
}

// committed displacement plus a uniform extra stretch de over the unit height
Eigen::VectorXd stretched(const FemSolver& solver, double de) {
  Eigen::VectorXd u = solver.displacements();
  const auto& nodes = solver.mesh().nodes;
  for (int n = 0; n < solver.mesh().n_nodes(); ++n) u(2 * n + 1) += de * nodes[n][1];
  return u;
}

}  // namespace

TEST_CASE("assembled tangent matches the internal-force derivative") {
  Mesh m = rect_mesh(2.0, 1.0, 2, 1);

  SUBCASE("virgin elastic state") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    (void)solver.run_program(ramp_to(5e-5, 1.0));
    check_tangent_direction(solver, stretched(solver, 2e-5), 1e-9);
  }

  SUBCASE("plastic flow") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(3e-4, 0.25));
    REQUIRE(!res.aborted);
    bool any_plastic = false;
    for (const auto& st : solver.states()) any_plastic |= st.k > 0.0;
    REQUIRE(any_plastic);
    check_tangent_direction(solver, stretched(solver, 4e-5), 1e-5);
  }

  SUBCASE("open crack") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(6e-3, 0.05));
    REQUIRE(!res.aborted);
    bool any_open = false;
    for (const auto& st : solver.states()) any_open |= st.crack_open;
    REQUIRE(any_open);
    check_tangent_direction(solver, stretched(solver, 2e-4), 1e-5);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("stepping, cut-back and abort") {
  Mesh m = rect_mesh(1.0, 1.0, 1, 1);

  SUBCASE("lands exactly on schedule vertices") {
    LoadProgram p;
    p.schedule = {{0.0, 0.0}, {0.4, 1e-4}, {1.0, -5e-5}};
    p.initial_increment = 0.17;
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(p);
    REQUIRE(!res.aborted);
    bool hit_04 = false, hit_10 = false;
    double prev = -1.0;
    for (const auto& r : res.curve) {
      CHECK(r.time > prev);
      prev = r.time;
      if (std::abs(r.time - 0.4) < 1e-12) {
        hit_04 = true;
        CHECK(r.u_control == doctest::Approx(1e-4).epsilon(1e-12));
      }
      if (std::abs(r.time - 1.0) < 1e-12) {
        hit_10 = true;
        CHECK(r.u_control == doctest::Approx(-5e-5).epsilon(1e-12));
      }
    }
    CHECK(hit_04);
    CHECK(hit_10);
    CHECK(res.curve.front().step == 0);
    CHECK(res.curve.front().u_control == 0.0);
  }

  SUBCASE("piecewise-linear factor evaluation") {
    LoadProgram p;
    p.schedule = {{0.0, 0.0}, {0.5, 2.0}, {1.5, -1.0}};
    CHECK(p.factor_at(0.25) == doctest::Approx(1.0));
    CHECK(p.factor_at(0.5) == doctest::Approx(2.0));
    CHECK(p.factor_at(1.0) == doctest::Approx(0.5));
    CHECK(p.factor_at(1.5) == doctest::Approx(-1.0));
    CHECK(p.end_time() == doctest::Approx(1.5));
  }

  SUBCASE("program validation") {
    LoadProgram p;
    p.schedule = {{0.1, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(p.validate(), config_error);
    p.schedule = {{0.0, 0.5}, {1.0, 1.0}};
    CHECK_THROWS_AS(p.validate(), config_error);
    p.schedule = {{0.0, 0.0}};
    CHECK_THROWS_AS(p.validate(), config_error);
    p.schedule = {{0.0, 0.0}, {0.5, 1.0}, {0.4, 0.0}};
    CHECK_THROWS_AS(p.validate(), config_error);
    p.schedule = {{0.0, 0.0}, {1.0, 1.0}};
    p.initial_increment = 0.0;
    CHECK_THROWS_AS(p.validate(), config_error);
  }

  SUBCASE("cut-back recovers from an oversized plastic step") {
    SolverSettings s;
    s.max_newton_iter = 2;
    FemSolver solver(m, concrete_A(), s, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(4e-4, 1.0));
    REQUIRE(!res.aborted);
    CHECK(res.curve.back().time == doctest::Approx(1.0));
    CHECK(res.curve.size() > 2);  // one full-range step would give 2 records
    CHECK(res.total_newton_iters == res.curve.back().newton_iters_cum);
  }

  SUBCASE("abort returns the partial history instead of throwing") {
    SolverSettings s;
    s.max_newton_iter = 0;  // nothing can converge
    FemSolver solver(m, concrete_A(), s, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(1e-3));
    CHECK(res.aborted);
    CHECK(res.abort_reason.find("no convergence at t =") != std::string::npos);
    REQUIRE(!res.curve.empty());
    CHECK(res.curve.back().time == doctest::Approx(0.0));
    CHECK(res.snapshots.size() == 1);  // fallback field of the last state
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("constraint and gauge validation") {
  Mesh m = rect_mesh(1.0, 1.0, 1, 1);

  SUBCASE("unknown node set") {
    std::vector<Constraint> c = {{"nonsense", 1, 0.0}};
    try {
      FemSolver solver(m, concrete_A(), {}, c, {});
      FAIL("expected config_error");
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find("unknown node set 'nonsense'") !=
            std::string::npos);
    }
  }

  SUBCASE("conflicting coefficients on one dof") {
    std::vector<Constraint> c = strip_constraints();
    c.push_back({"bottom_left", 1, 0.5});  // bottom already pins dof 1 to 0
    try {
      FemSolver solver(m, concrete_A(), {}, c, {});
      FAIL("expected config_error");
    } catch (const config_error& e) {
      CHECK(std::string(e.what()).find("constrained twice") != std::string::npos);
    }
  }

  SUBCASE("repeating the same coefficient is fine") {
    std::vector<Constraint> c = strip_constraints();
    c.push_back({"bottom_left", 1, 0.0});
    CHECK_NOTHROW(FemSolver(m, concrete_A(), {}, c, {}));
  }

  SUBCASE("no constraints at all") {
    CHECK_THROWS_AS(FemSolver(m, concrete_A(), {}, {}, {}), config_error);
  }

  SUBCASE("gauge nodes must exist") {
    Gauge g;
    g.node_a = 0;
    g.node_b = 99;
    CHECK_THROWS_AS(FemSolver(m, concrete_A(), {}, strip_constraints(), g),
                    config_error);
  }

  SUBCASE("gauge reports the relative displacement") {
    // stretch: top moves by u, bottom stays; gauge across the height
    Gauge g;
    g.node_a = m.node_sets.at("bottom_left")[0];
    g.node_b = m.node_sets.at("top")[0];
    g.dof = 1;
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), g);
    const RunResult res = solver.run_program(ramp_to(1e-5, 1.0));
    REQUIRE(!res.aborted);
    CHECK(res.curve.back().cmod == doctest::Approx(1e-5).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("snapshots and fields") {
  Mesh m = rect_mesh(1.0, 1.0, 1, 1);

  LoadProgram p;
  p.schedule = {{0.0, 0.0}, {0.5, 2e-4}, {1.0, 1e-4}};
  p.initial_increment = 0.1;

  SUBCASE("extrema mode snapshots every schedule vertex") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(p);
    REQUIRE(!res.aborted);
    REQUIRE(res.snapshots.size() == 2);
    CHECK(res.snapshots[0].time == doctest::Approx(0.5));
    CHECK(res.snapshots[1].time == doctest::Approx(1.0));
  }

  SUBCASE("every_n mode includes the final state") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    SnapshotPolicy pol;
    pol.mode = SnapshotPolicy::Mode::every_n;
    pol.n = 3;
    const RunResult res = solver.run_program(p, pol);
    REQUIRE(!res.aborted);
    REQUIRE(!res.snapshots.empty());
    CHECK(res.snapshots.back().time == doctest::Approx(1.0));
    for (const auto& s : res.snapshots)
      CHECK((s.step % 3 == 0 || s.time == doctest::Approx(1.0)));
  }

  SUBCASE("final_only mode emits exactly one") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    SnapshotPolicy pol;
    pol.mode = SnapshotPolicy::Mode::final_only;
    const RunResult res = solver.run_program(p, pol);
    REQUIRE(!res.aborted);
    REQUIRE(res.snapshots.size() == 1);
    CHECK(res.snapshots[0].time == doctest::Approx(1.0));
  }

  SUBCASE("field content tracks damage and the crack opening") {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    const RunResult res = solver.run_program(ramp_to(6e-3, 0.05),
                                             {SnapshotPolicy::Mode::final_only});
    REQUIRE(!res.aborted);
    REQUIRE(res.snapshots.size() == 1);
    const FieldSnapshot& s = res.snapshots[0];
    REQUIRE(s.damage.size() == 1);
    CHECK(s.damage[0] > 0.35);  // beyond the crack threshold d_c
    CHECK(s.k[0] > derive_params(concrete_A(), 1.0).k_c);
    CHECK(s.crack_opening[0] > 0.0);
    bool any_open = false;
    for (const auto& st : solver.states()) any_open |= st.crack_open;
    CHECK(any_open);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("determinism: identical runs produce identical histories") {
  Mesh m = rect_mesh(2.0, 1.0, 2, 1);
  LoadProgram p;
  p.schedule = {{0.0, 0.0}, {0.5, 5e-3}, {1.0, 1e-3}};
  p.initial_increment = 0.05;

  const auto run = [&]() {
    FemSolver solver(m, concrete_A(), {}, strip_constraints(), {});
    return solver.run_program(p);
  };
  const RunResult r1 = run();
  const RunResult r2 = run();
  REQUIRE(!r1.aborted);
  REQUIRE(r1.curve.size() == r2.curve.size());
  for (size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(r1.curve[i].time == r2.curve[i].time);
    CHECK(r1.curve[i].reaction == r2.curve[i].reaction);
    CHECK(r1.curve[i].cmod == r2.curve[i].cmod);
    CHECK(r1.curve[i].newton_iters_cum == r2.curve[i].newton_iters_cum);
  }
  CHECK(r1.total_newton_iters == r2.total_newton_iters);
}
