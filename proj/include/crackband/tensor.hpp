#pragma once
// Symmetric second-order tensors in 3D, their spectral decomposition and the
// tension/compression split, plus the isotropic elastic moduli.
//
// Storage convention: six independent tensor components (xx, yy, zz, xy, xz,
// yz). Shear components are stored as tensor components throughout; the
// engineering-shear convention (gamma = 2*eps_12) appears only at the Voigt
// interface used by the finite elements.

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "crackband/errors.hpp"

namespace crackband {

// Voigt component order used everywhere: (11, 22, 33, 12, 13, 23).
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct SymTensor {
  double xx = 0.0, yy = 0.0, zz = 0.0;
  double xy = 0.0, xz = 0.0, yz = 0.0;

  static SymTensor zero() { return {}; }
  static SymTensor identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
  static SymTensor diag(double a, double b, double c) {
    return {a, b, c, 0.0, 0.0, 0.0};
  }

  double trace() const { return xx + yy + zz; }

  // full double contraction a : b (off-diagonals count twice)
  double ddot(const SymTensor& o) const {
    return xx * o.xx + yy * o.yy + zz * o.zz +
           2.0 * (xy * o.xy + xz * o.xz + yz * o.yz);
  }

  double norm() const { return std::sqrt(ddot(*this)); }

  bool finite() const {
    return std::isfinite(xx) && std::isfinite(yy) && std::isfinite(zz) &&
           std::isfinite(xy) && std::isfinite(xz) && std::isfinite(yz);
  }

  SymTensor operator+(const SymTensor& o) const {
    return {xx + o.xx, yy + o.yy, zz + o.zz, xy + o.xy, xz + o.xz, yz + o.yz};
  }
  SymTensor operator-(const SymTensor& o) const {
    return {xx - o.xx, yy - o.yy, zz - o.zz, xy - o.xy, xz - o.xz, yz - o.yz};
  }
  SymTensor operator-() const { return {-xx, -yy, -zz, -xy, -xz, -yz}; }
  SymTensor operator*(double s) const {
    return {xx * s, yy * s, zz * s, xy * s, xz * s, yz * s};
  }
  SymTensor& operator+=(const SymTensor& o) {
    *this = *this + o;
    return *this;
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m;
    m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
    return m;
  }
  static SymTensor from_matrix(const Eigen::Matrix3d& m) {
    return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)),
            0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(1, 2) + m(2, 1))};
  }

  // Voigt interface. Stress-like vectors carry the shear components as is,
  // strain-like vectors carry engineering shears (factor 2).
  Vec6 to_voigt_stress() const {
    Vec6 v;
    v << xx, yy, zz, xy, xz, yz;
    return v;
  }
  Vec6 to_voigt_strain() const {
    Vec6 v;
    v << xx, yy, zz, 2.0 * xy, 2.0 * xz, 2.0 * yz;
    return v;
  }
  static SymTensor from_voigt_stress(const Vec6& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }
  static SymTensor from_voigt_strain(const Vec6& v) {
    return {v(0), v(1), v(2), 0.5 * v(3), 0.5 * v(4), 0.5 * v(5)};
  }
};

inline SymTensor operator*(double s, const SymTensor& t) { return t * s; }

inline double macaulay(double x) { return x > 0.0 ? x : 0.0; }
// step function; the convention here is H(x) = 0 for x <= 0
inline double heaviside(double x) { return x > 0.0 ? 1.0 : 0.0; }

// Eigenvalues sorted descending, eigenvectors orthonormal and matched to the
// eigenvalues. Sign convention: the component of largest magnitude of each
// eigenvector is positive (first such index wins on ties).
struct Spectral {
  std::array<double, 3> values{};
  std::array<Eigen::Vector3d, 3> dirs{};
};

// Closed-form (trigonometric) symmetric 3x3 eigensolver with an iterative
// fallback for near-degenerate spectra. Throws invalid_input_error on
// non-finite input.
Spectral spectral_decompose(const SymTensor& t);

// Positive (tensile) projection built from the spectral decomposition:
// sum of H(lambda_i) * lambda_i * n_i x n_i. The compressive part is the
// remainder t - tensile_part(t).
SymTensor tensile_part(const Spectral& s);
SymTensor tensile_part(const SymTensor& t);

// volumetric/deviatoric split: t = p*I + s with p = tr(t)/3
struct VolDev {
  double p = 0.0;
  SymTensor s;
};
VolDev vol_dev_split(const SymTensor& t);

struct Invariants {
  double I1 = 0.0;  // trace
  double J2 = 0.0;  // 0.5 s:s
  double p = 0.0;   // I1/3
  double q = 0.0;   // sqrt(3 J2)
};
Invariants invariants(const SymTensor& t);

// n^T t n for a unit vector n; throws invalid_input_error if |n| deviates
// from one by more than 1e-10
double normal_projection(const SymTensor& t, const Eigen::Vector3d& n);

// Isotropic linear elasticity. D maps Voigt strain (engineering shear) to
// Voigt stress.
struct ElasticModuli {
  double E = 0.0;
  double nu = 0.0;
  double K = 0.0;
  double G = 0.0;
  double lambda = 0.0;
  Mat6 D = Mat6::Zero();

  ElasticModuli() = default;
  ElasticModuli(double E_, double nu_);

  // sigma = lambda tr(eps) I + 2 G eps, equivalent to D * voigt(eps)
  SymTensor apply(const SymTensor& strain) const {
    const double lt = lambda * strain.trace();
    const double g2 = 2.0 * G;
    return {lt + g2 * strain.xx, lt + g2 * strain.yy, lt + g2 * strain.zz,
            g2 * strain.xy,      g2 * strain.xz,      g2 * strain.yz};
  }

  // inverse map, eps = D^-1 sigma
  SymTensor apply_inverse(const SymTensor& stress) const {
    const double a = -nu / E;
    const double tr = stress.trace();
    const double g2inv = 0.5 / G;
    return {(1.0 + nu) / E * stress.xx + a * tr,
            (1.0 + nu) / E * stress.yy + a * tr,
            (1.0 + nu) / E * stress.zz + a * tr,
            g2inv * stress.xy, g2inv * stress.xz, g2inv * stress.yz};
  }
};

}  // namespace crackband
