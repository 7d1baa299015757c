#include "crackband/material_1d.hpp"

#include <cmath>

namespace crackband {

Result1D integrate_1d(const State1D& state, double deps, double E,
                      double sigma_y, double alpha, double k_c,
                      const IntegrationOptions& opt) {
  if (!std::isfinite(deps))
    throw invalid_input_error("integrate_1d: non-finite strain increment");

  State1D st = state;
  double eff = deps;
  bool update_stress = true;

  if (st.crack_open) {
    const double eps_d_new = st.eps_d + deps;
    if (eps_d_new < 0.0) {
      st.eps_d = 0.0;
      st.crack_open = false;
      eff = opt.strict_closure ? eps_d_new : 0.0;
    } else {
      st.eps_d = eps_d_new;
      st.k += macaulay(deps);
      update_stress = false;
    }
  }

  if (update_stress) {
    const double trial = st.sigma_eff + E * eff;
    if (trial - sigma_y > 0.0) {
      const double deps_p = (trial - sigma_y) / E;
      const bool opens = opt.discontinuity_enabled &&
                         st.k + deps_p > k_c && eff > 0.0;
      if (opens) {
        st.eps_d = eff;
        st.crack_open = true;
        st.sigma_eff = sigma_y - E * (eff - deps_p);  // pre-increment stress
        st.k += eff;
        st.crack_initiated = true;
      } else {
        st.eps_p += deps_p;
        st.sigma_eff = sigma_y;
        st.k += deps_p;
      }
    } else {
      st.sigma_eff = trial;
    }
  }

  st.d = damage_from_k(st.k, alpha);
  const double stress = st.sigma_eff > 0.0 ? (1.0 - st.d) * st.sigma_eff
                                           : st.sigma_eff;
  return {stress, st};
}

std::vector<Record1D> run_strain_program(const std::vector<double>& vertices,
                                         double deps_max, double E,
                                         double sigma_y, double alpha,
                                         double k_c,
                                         const IntegrationOptions& opt) {
  if (vertices.size() < 2)
    throw config_error("strain program needs at least two vertices");
  if (!(deps_max > 0.0))
    throw config_error("strain step must be positive");

  // total path length fixes the pseudo-time normalisation
  double path = 0.0;
  for (size_t i = 1; i < vertices.size(); ++i)
    path += std::abs(vertices[i] - vertices[i - 1]);
  if (path == 0.0) throw config_error("strain program has zero path length");

  std::vector<Record1D> out;
  State1D st;
  double eps = vertices.front();
  double walked = 0.0;
  int step = 0;
  out.push_back({step, 0.0, eps, 0.0, st});

  for (size_t i = 1; i < vertices.size(); ++i) {
    const double seg = vertices[i] - vertices[i - 1];
    const int n = std::max(1, (int)std::ceil(std::abs(seg) / deps_max));
    const double de = seg / n;
    for (int j = 0; j < n; ++j) {
      const Result1D r = integrate_1d(st, de, E, sigma_y, alpha, k_c, opt);
      st = r.state;
      eps += de;
      walked += std::abs(de);
      ++step;
      out.push_back({step, walked / path, eps, r.stress, st});
    }
  }
  return out;
}

}  // namespace crackband
