#pragma once

#include "cmcflow/mesh.hpp"

#include <functional>
#include <memory>

namespace cmcflow {

/// Scalar field on (a neighborhood of) S^3 with ambient derivatives.
struct AmbientScalar {
  std::function<double(const Vec4&)> value;
  std::function<Vec4(const Vec4&)> gradient;
  std::function<Mat4(const Vec4&)> hessian;
};

/// The target 3-sphere.  The round model is the unit S^3 in R^4 with the
/// induced metric; the conformal model rescales it by e^{2φ} intrinsically,
/// reusing the same subset, projection and tangent spaces.
class MetricModel {
 public:
  virtual ~MetricModel() = default;

  int ambient_dim() const { return 4; }
  virtual double total_volume() const = 0;

  /// Nearest-point projection Π.  Throws std::domain_error outside the
  /// tubular neighborhood (|v| <= tube radius, default 0.1).
  virtual Vec4 project(const Vec4& v) const;
  virtual Mat4 tangent_projector(const Vec4& y) const;

  virtual Vec4 second_fundamental(const Vec4& y, const Vec4& X, const Vec4& Y) const;

  virtual double metric_dot(const Vec4& y, const Vec4& X, const Vec4& Y) const = 0;
  virtual Vec4 cross(const Vec4& y, const Vec4& X, const Vec4& Y) const = 0;
  virtual double volume_form(const Vec4& y, const Vec4& X, const Vec4& Y, const Vec4& Z) const = 0;
  /// Euclidean Riesz vector r with r·Z = volume_form(y, X, Y, Z).
  virtual Vec4 volume_form_riesz(const Vec4& y, const Vec4& X, const Vec4& Y) const = 0;

  virtual double ricci(const Vec4& y, const Vec4& X, const Vec4& Y) const = 0;
  virtual Mat4 ricci_matrix(const Vec4& y) const = 0;
  virtual double scalar_curvature(const Vec4& y) const = 0;

  /// Full (0,4) curvature from the 3D Kulkarni-Nomizu identity
  /// R = (Ric - scal/4 g) ∧ g, matching R(X,Y,Y,X) > 0 on the round sphere.
  double curvature(const Vec4& y, const Vec4& X, const Vec4& Y, const Vec4& Z,
                   const Vec4& W) const;
  /// 4x4 matrix K with K_cd = R(e_c, Y, Y, e_d).
  Mat4 curvature_operator(const Vec4& y, const Vec4& Y) const;

  /// Energy density weight (e^{2φ}; 1 for the round model) and its ambient
  /// gradient; these make the Dirichlet energy the honest g-energy.
  virtual double energy_weight(const Vec4&) const { return 1.0; }
  virtual Vec4 energy_weight_gradient(const Vec4&) const { return Vec4::Zero(); }
  virtual bool unit_energy_weight() const { return true; }

  /// Christoffel correction so that the CMC equation reads
  ///   Δu + tension_correction(u)(∇u,∇u) = H · cmc_star(u)(∇u).
  /// Round model: tension_correction = |∇u|² y = -A(u)(∇u,∇u),
  /// cmc_star = Q(u_{x1}, u_{x2}).
  virtual Vec4 tension_correction(const Vec4& y, const Vec4& G1, const Vec4& G2) const = 0;
  virtual Vec4 cmc_star(const Vec4& y, const Vec4& G1, const Vec4& G2) const = 0;

  /// True when the model is the isometrically embedded round sphere, for
  /// which the second-variation assembly is available.
  virtual bool embedded_round() const { return false; }

  double tube_radius = 0.1;
};

std::shared_ptr<MetricModel> round_s3();
std::shared_ptr<MetricModel> conformal_round(AmbientScalar phi);

/// Generalized cross product: q with q·Z = det[X Y Z W] for all Z.
Vec4 cross4(const Vec4& X, const Vec4& Y, const Vec4& W);

}  // namespace cmcflow
