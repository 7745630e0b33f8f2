#pragma once

#include "cmcflow/fields.hpp"

#include <optional>

namespace cmcflow {

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double biharmonic_part = 0.0;
  double d_eps = 0.0;
  double tracked_volume = 0.0;
  double total = 0.0;
  double H = 0.0;
  double eps = 0.0;
};

/// Thrown by volume_increment when the endpoints are farther apart than the
/// locality bound; the caller must subdivide the step.
struct LocalityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double default_delta0();

/// D(u) = ½∫|∇u|² (with the metric's energy weight for conformal models).
double dirichlet(const MapField& u);

/// D_ε(u) = ½∫ ε²|Δu|² + |∇u|².
double perturbed_energy(const MapField& u, double eps);
double biharmonic_part(const MapField& u, double eps);

/// Signed volume swept by the projected line homotopy s ↦ Π(s·u1 + (1-s)·u0),
/// by per-face barycenter quadrature with `s_gauss` Gauss points in s.
/// Antisymmetric in its arguments.  Throws LocalityError when
/// ‖u1-u0‖_∞ ≥ delta0.
double volume_increment(const MapField& u0, const MapField& u1,
                        double delta0 = default_delta0(), int s_gauss = 4);

/// volume_increment with recursive midpoint bisection for distant endpoints.
double volume_increment_safe(const MapField& u0, const MapField& u1,
                             double delta0 = default_delta0(), int s_gauss = 4);

EnergyBreakdown tracked_energy(const MapField& u, double tracked_volume, double H, double eps);

/// First variation of E_{H,ε}.  `raw` is the Euler-Lagrange cofield in the
/// vertex basis (the exact differential of the discrete functional along
/// affine perturbations); `tangent` its pointwise tangent projection, the
/// differential of E ∘ Π on discrete tangent fields.
struct Gradient {
  MatX raw;
  MatX tangent;
  /// Dual (mass-inverse-weighted) norm of the tangent cofield.
  double tangent_norm = 0.0;
};
Gradient gradient(const MapField& u, double H, double eps);

/// Second variation of E_{H,ε} at a critical point, as the exact second
/// derivative of the discrete energy along t ↦ Π(u + tψ) (the biharmonic and
/// Dirichlet blocks) plus the quadrature of the volume-term second derivative.
/// Only defined for the embedded round model.  `criticality_warning` is set
/// when the tangent gradient norm exceeds `grad_tol`.
SpMat hessian_matrix(const MapField& u, double H, double eps,
                     double grad_tol = 1e-4, bool* criticality_warning = nullptr);

/// Matrix-free symmetrized Hessian action on a per-vertex field (V x 4).
MatX hessian_apply(const MapField& u, const MatX& psi, double H, double eps);

/// Alternative evaluation of the second variation through the intrinsic form
/// (pullback connection and curvature term); agrees with hessian_apply up to
/// discretization error.  Used as a cross-check.
double hessian_intrinsic_form(const MapField& u, const MatX& psi, const MatX& xi, double H,
                              double eps);

struct CmcResidual {
  MatX field;   // V x 4 pointwise residual Δu - A(u)(∇u,∇u) - H·*(u*Q)
  double norm;  // mass-weighted L²
};
CmcResidual cmc_residual(const MapField& u, double H);

struct HopfResidual {
  double norm = 0.0;  // mass-weighted L² of |φ|, normalized by D(u)
  bool degenerate = false;
};
HopfResidual hopf_residual(const MapField& u);

/// Per-vertex density ε²|Δu|² + |∇u|² (face gradients area-averaged onto
/// vertices); integrates against vertex areas to 2·D_ε.
VecX vertex_energy_density(const MapField& u, double eps);

/// Per-face squared gradient norm ‖∇u‖²_F.
VecX face_gradient_energy(const MapField& u);

}  // namespace cmcflow
