#pragma once

#include "cmcflow/mesh.hpp"
#include "cmcflow/metric.hpp"

#include <cstdint>
#include <memory>

namespace cmcflow {

/// Per-vertex map u: S² → S³ ⊂ R⁴, the unknown of all flows.
struct MapField {
  const SphereMesh* mesh = nullptr;
  std::shared_ptr<const MetricModel> metric;
  MatX values;  // V x 4, rows on S³

  int num_vertices() const { return static_cast<int>(values.rows()); }
  Vec4 at(int i) const { return values.row(i).transpose(); }
  /// Re-projects every vertex value onto S³.
  void reproject();
  /// Largest vertex deviation from the target constraint.
  double constraint_defect() const;
};

/// Per-vertex section of u*TS³ (tangent vectors along a map).
struct TangentField {
  const SphereMesh* mesh = nullptr;
  MatX vectors;  // V x 4

  Vec4 at(int i) const { return vectors.row(i).transpose(); }
};

MapField constant_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                      const Vec4& point);

/// Latitude slice u(x) = (√(1-c²)·x, c).
MapField latitude_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric, double c);

/// Geodesic sphere of radius r about the north pole e₄: u_r(x) = (sin r·x, cos r).
MapField geodesic_sphere_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                             double r);

/// The equatorial embedding u(x) = (x, 0).
MapField equator_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric);

/// Pointwise tangent projection of an ambient per-vertex field.
TangentField project_tangent(const MapField& u, const MatX& ambient);

/// u composed with the Möbius dilation of factor `lambda` of the domain
/// (stereographic from the north pole, z ↦ λz, back), sampled analytically
/// when `analytic` is a callable, otherwise by mesh interpolation.
MapField mobius_reparametrized(const MapField& u, double lambda);

/// Evaluates u ∘ m at every vertex by P1 interpolation, where m is the Möbius
/// dilation above.  Shared by reparametrization tests and bubble construction.
Vec3 mobius_dilate_domain(const Vec3& x, double lambda);

/// Smooth random map: Π(p + amplitude · low-order perturbation), seeded.
MapField random_smooth_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                           std::uint64_t seed, double amplitude);

/// Smooth random tangent field along u with unit mass-weighted L² norm.
TangentField random_tangent_field(const MapField& u, std::uint64_t seed);

/// Pushforward du(X) of a random smooth domain vector field (a
/// reparametrization direction), normalized; used to nudge maps along their
/// own image.
TangentField random_reparametrization_field(const MapField& u, std::uint64_t seed);

/// Mass-weighted L² distance between two maps on the same mesh.
double l2_distance(const MapField& a, const MapField& b);
double linf_distance(const MapField& a, const MapField& b);

/// Mass-weighted L² norm of a per-vertex field.
double l2_norm(const SphereMesh& mesh, const MatX& field);

}  // namespace cmcflow
