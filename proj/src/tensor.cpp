// Spectral decomposition and tensor helpers.
//
// The eigensolver follows the usual closed-form recipe for symmetric 3x3
// matrices: eigenvalues from the trigonometric solution of the characteristic
// cubic, eigenvectors from cross products of rows of (A - lambda I). Whenever
// the spectrum is close to degenerate, or the closed form fails its own
// reconstruction check, we fall back to an iterative solver, which is slower
// but unconditionally robust.

#include "crackband/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace crackband {

namespace {

constexpr double kDegenerateGap = 1e-12;   // relative eigenvalue gap for fallback
constexpr double kRecheckTol = 1e-11;      // relative reconstruction tolerance
constexpr double kZeroNorm = 1e-14;        // absolute: treat tensor as zero

void apply_sign_convention(Eigen::Vector3d& v) {
  int imax = 0;
  double amax = std::abs(v(0));
  for (int i = 1; i < 3; ++i) {
    if (std::abs(v(i)) > amax) {
      amax = std::abs(v(i));
      imax = i;
    }
  }
  if (v(imax) < 0.0) v = -v;
}

Spectral sorted_from_pairs(std::array<double, 3> vals,
                           std::array<Eigen::Vector3d, 3> vecs) {
  std::array<int, 3> idx = {0, 1, 2};
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return vals[a] > vals[b]; });
  Spectral out;
  for (int i = 0; i < 3; ++i) {
    out.values[i] = vals[idx[i]];
    out.dirs[i] = vecs[idx[i]];
    apply_sign_convention(out.dirs[i]);
  }
  return out;
}

Spectral iterative_decompose(const SymTensor& t) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  es.compute(t.matrix());
  std::array<double, 3> vals;
  std::array<Eigen::Vector3d, 3> vecs;
  for (int i = 0; i < 3; ++i) {
    vals[i] = es.eigenvalues()(i);
    vecs[i] = es.eigenvectors().col(i);
  }
  return sorted_from_pairs(vals, vecs);
}

// eigenvector of A for eigenvalue lam via the largest cross product of two
// rows of (A - lam I); returns false when all cross products are tiny
// (repeated eigenvalue)
bool eigenvector_for(const Eigen::Matrix3d& A, double lam, double scale,
                     Eigen::Vector3d& v) {
  Eigen::Matrix3d M = A - lam * Eigen::Matrix3d::Identity();
  Eigen::Vector3d r0 = M.row(0), r1 = M.row(1), r2 = M.row(2);
  Eigen::Vector3d c01 = r0.cross(r1);
  Eigen::Vector3d c02 = r0.cross(r2);
  Eigen::Vector3d c12 = r1.cross(r2);
  double n01 = c01.squaredNorm(), n02 = c02.squaredNorm(),
         n12 = c12.squaredNorm();
  Eigen::Vector3d best = c01;
  double nbest = n01;
  if (n02 > nbest) {
    best = c02;
    nbest = n02;
  }
  if (n12 > nbest) {
    best = c12;
    nbest = n12;
  }
  const double floor = 1e-24 * scale * scale * scale * scale;
  if (nbest <= floor) return false;
  v = best / std::sqrt(nbest);
  return true;
}

double reconstruction_error(const SymTensor& t, const Spectral& s) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i)
    R += s.values[i] * (s.dirs[i] * s.dirs[i].transpose());
  return (R - t.matrix()).norm();
}

}  // namespace

Spectral spectral_decompose(const SymTensor& t) {
  if (!t.finite())
    throw invalid_input_error("spectral_decompose: non-finite tensor component");

  const double tnorm = t.norm();
  if (tnorm < kZeroNorm) {
    Spectral out;
    out.values = {0.0, 0.0, 0.0};
    out.dirs = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                Eigen::Vector3d::UnitZ()};
    return out;
  }

  // trigonometric eigenvalues of the characteristic cubic
  const double q = t.trace() / 3.0;
  const double p1 = t.xy * t.xy + t.xz * t.xz + t.yz * t.yz;
  const double dxx = t.xx - q, dyy = t.yy - q, dzz = t.zz - q;
  const double p2 = dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);

  std::array<double, 3> vals;
  if (p < kZeroNorm * std::max(1.0, tnorm)) {
    vals = {q, q, q};  // hydrostatic
  } else {
    Eigen::Matrix3d B = (t.matrix() - q * Eigen::Matrix3d::Identity()) / p;
    double r = B.determinant() / 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double l1 = q + 2.0 * p * std::cos(phi);
    const double l3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    vals = {l1, 3.0 * q - l1 - l3, l3};  // descending
  }

  // near-degenerate spectra go to the iterative path immediately
  const double gap01 = std::abs(vals[0] - vals[1]);
  const double gap12 = std::abs(vals[1] - vals[2]);
  if (std::min(gap01, gap12) <= kDegenerateGap * tnorm)
    return iterative_decompose(t);

  const Eigen::Matrix3d A = t.matrix();
  Eigen::Vector3d v0, v2;
  if (!eigenvector_for(A, vals[0], tnorm, v0) ||
      !eigenvector_for(A, vals[2], tnorm, v2))
    return iterative_decompose(t);

  // sharpen orthogonality, then complete the right-handed triad
  v2 = (v2 - v2.dot(v0) * v0).normalized();
  Eigen::Vector3d v1 = v2.cross(v0);

  Spectral out;
  out.values = vals;
  out.dirs = {v0, v1, v2};
  for (auto& d : out.dirs) apply_sign_convention(d);

  if (reconstruction_error(t, out) > kRecheckTol * tnorm)
    return iterative_decompose(t);
  return out;
}

SymTensor tensile_part(const Spectral& s) {
  Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    if (heaviside(s.values[i]) > 0.0)
      R += s.values[i] * (s.dirs[i] * s.dirs[i].transpose());
  }
  return SymTensor::from_matrix(R);
}

SymTensor tensile_part(const SymTensor& t) {
  return tensile_part(spectral_decompose(t));
}

VolDev vol_dev_split(const SymTensor& t) {
  VolDev out;
  out.p = t.trace() / 3.0;
  out.s = t - SymTensor::diag(out.p, out.p, out.p);
  return out;
}

Invariants invariants(const SymTensor& t) {
  Invariants inv;
  inv.I1 = t.trace();
  inv.p = inv.I1 / 3.0;
  const VolDev vd = vol_dev_split(t);
  inv.J2 = 0.5 * vd.s.ddot(vd.s);
  inv.q = std::sqrt(3.0 * inv.J2);
  return inv;
}

double normal_projection(const SymTensor& t, const Eigen::Vector3d& n) {
  if (!t.finite() || !n.allFinite())
    throw invalid_input_error("normal_projection: non-finite input");
  if (std::abs(n.norm() - 1.0) > 1e-10)
    throw invalid_input_error("normal_projection: direction is not unit length");
  return n.dot(t.matrix() * n);
}

ElasticModuli::ElasticModuli(double E_, double nu_) : E(E_), nu(nu_) {
  if (!(E > 0.0))
    throw invalid_input_error("elastic moduli: E must be positive");
  if (!(nu > -1.0 && nu < 0.5))
    throw invalid_input_error("elastic moduli: nu must lie in (-1, 0.5)");
  K = E / (3.0 * (1.0 - 2.0 * nu));
  G = E / (2.0 * (1.0 + nu));
  lambda = K - 2.0 * G / 3.0;
  D.setZero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) D(i, j) = lambda;
  for (int i = 0; i < 3; ++i) D(i, i) = lambda + 2.0 * G;
  for (int i = 3; i < 6; ++i) D(i, i) = G;  // engineering shear in, stress out
}

}  // namespace crackband
