#pragma once
// Scalar (uniaxial) specialisation of the plastic-damage model with
// discontinuity strain, plus a small strain-driven cycle driver. The 1D
// kernel mirrors the tensor routine branch by branch and is cheap enough for
// fine-step energy integration.

#include <vector>

#include "crackband/material.hpp"

namespace crackband {

struct State1D {
  double sigma_eff = 0.0;
  double eps_p = 0.0;
  double eps_d = 0.0;
  double k = 0.0;
  double d = 0.0;
  bool crack_initiated = false;
  bool crack_open = false;
};

struct Result1D {
  double stress = 0.0;  // nominal stress
  State1D state;
};

// One strain increment of the uniaxial model. E, sigma_y, alpha, k_c as in
// the tensor model; options follow the same closure semantics.
Result1D integrate_1d(const State1D& state, double deps, double E,
                      double sigma_y, double alpha, double k_c,
                      const IntegrationOptions& opt = {});

// record of one converged step of the 1D driver
struct Record1D {
  int step = 0;
  double time = 0.0;  // program fraction in [0, 1]
  double eps = 0.0;
  double stress = 0.0;
  State1D state;
};

// Runs a piecewise-linear strain program (vertices of total strain) with
// steps of at most deps_max, landing exactly on every vertex.
std::vector<Record1D> run_strain_program(const std::vector<double>& vertices,
                                         double deps_max, double E,
                                         double sigma_y, double alpha,
                                         double k_c,
                                         const IntegrationOptions& opt = {});

}  // namespace crackband
