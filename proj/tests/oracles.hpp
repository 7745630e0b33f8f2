#pragma once

// Test-only oracles: finite differences of the tracked energy along the
// projected straight-line deformation, independent of the gradient and
// second-variation assembly they cross-check.

#include "cmcflow/energy.hpp"

namespace cmcflow::oracles {

inline MapField deformed(const MapField& u, const MatX& psi, double t) {
  MapField out{u.mesh, u.metric, u.values + t * psi};
  out.reproject();
  return out;
}

// E(t) = D_eps(Π(u + tψ)) + H · (V0 + increment(u, Π(u + tψ))).
inline double tracked_energy_at(const MapField& u, const MatX& psi, double t, double H,
                                double eps, double v0 = 0.0) {
  const MapField ut = deformed(u, psi, t);
  const double v = v0 + volume_increment_safe(u, ut);
  return perturbed_energy(ut, eps) + H * v;
}

inline double central_difference(const MapField& u, const MatX& psi, double H, double eps,
                                 double t) {
  return (tracked_energy_at(u, psi, t, H, eps) - tracked_energy_at(u, psi, -t, H, eps)) /
         (2.0 * t);
}

inline double second_difference(const MapField& u, const MatX& psi, double H, double eps,
                                double t) {
  const double ep = tracked_energy_at(u, psi, t, H, eps);
  const double e0 = tracked_energy_at(u, psi, 0.0, H, eps);
  const double em = tracked_energy_at(u, psi, -t, H, eps);
  return (ep - 2.0 * e0 + em) / (t * t);
}

}  // namespace cmcflow::oracles
