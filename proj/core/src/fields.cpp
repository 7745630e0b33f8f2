#include "cmcflow/fields.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cmcflow {

void MapField::reproject() {
  for (int i = 0; i < num_vertices(); ++i) {
    values.row(i) = metric->project(at(i)).transpose();
  }
}

double MapField::constraint_defect() const {
  double worst = 0.0;
  for (int i = 0; i < num_vertices(); ++i) {
    worst = std::max(worst, std::abs(values.row(i).norm() - 1.0));
  }
  return worst;
}

MapField constant_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                      const Vec4& point) {
  MapField u{&mesh, std::move(metric), MatX(mesh.num_vertices(), 4)};
  const Vec4 p = u.metric->project(point);
  u.values.rowwise() = p.transpose();
  return u;
}

MapField latitude_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric, double c) {
  if (c < -1.0 || c > 1.0) throw std::invalid_argument("latitude parameter must lie in [-1, 1]");
  MapField u{&mesh, std::move(metric), MatX(mesh.num_vertices(), 4)};
  const double rho = std::sqrt(std::max(0.0, 1.0 - c * c));
  u.values.leftCols<3>() = rho * mesh.vertices;
  u.values.col(3).setConstant(c);
  return u;
}

MapField geodesic_sphere_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                             double r) {
  return latitude_map(mesh, std::move(metric), std::cos(r));
}

MapField equator_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric) {
  return latitude_map(mesh, std::move(metric), 0.0);
}

TangentField project_tangent(const MapField& u, const MatX& ambient) {
  TangentField psi{u.mesh, MatX(ambient.rows(), 4)};
  for (int i = 0; i < ambient.rows(); ++i) {
    const Vec4 y = u.at(i);
    const Vec4 a = ambient.row(i).transpose();
    psi.vectors.row(i) = (a - y.dot(a) * y).transpose();
  }
  return psi;
}

Vec3 mobius_dilate_domain(const Vec3& x, double lambda) {
  // Stereographic projection from the north pole e3; z = 0 is the south pole.
  const double denom = 1.0 - x[2];
  if (denom < 1e-14) return x;  // fixed point at the pole
  const double zx = x[0] / denom, zy = x[1] / denom;
  const double wx = lambda * zx, wy = lambda * zy;
  const double r2 = wx * wx + wy * wy;
  return Vec3(2.0 * wx, 2.0 * wy, r2 - 1.0) / (r2 + 1.0);
}

MapField mobius_reparametrized(const MapField& u, double lambda) {
  MapField out{u.mesh, u.metric, MatX(u.num_vertices(), 4)};
  for (int i = 0; i < u.num_vertices(); ++i) {
    const Vec3 y = mobius_dilate_domain(u.mesh->vertices.row(i).transpose(), lambda);
    auto [f, b] = u.mesh->locate(y);
    out.values.row(i) = u.metric->project(u.mesh->interpolate(u.values, f, b)).transpose();
  }
  return out;
}

namespace {

MatX low_order_field(const SphereMesh& mesh, std::mt19937_64& rng, double amplitude) {
  // Random combination of constants and first/second harmonics per component;
  // smooth by construction.
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatX out(mesh.num_vertices(), 4);
  for (int c = 0; c < 4; ++c) {
    const double a0 = gauss(rng);
    Vec3 a1(gauss(rng), gauss(rng), gauss(rng));
    Eigen::Matrix3d a2;
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) a2(r, s) = gauss(rng);
    a2 = 0.5 * (a2 + a2.transpose()).eval();
    a2 -= (a2.trace() / 3.0) * Eigen::Matrix3d::Identity();
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      const Vec3 x = mesh.vertices.row(i).transpose();
      out(i, c) = a0 + a1.dot(x) + x.dot(a2 * x);
    }
  }
  return amplitude * out;
}

}  // namespace

MapField random_smooth_map(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                           std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec4 base(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  base.normalize();
  MapField u{&mesh, std::move(metric), MatX(mesh.num_vertices(), 4)};
  MatX pert = low_order_field(mesh, rng, amplitude);
  // Keep every perturbed point well inside the projection tube.
  for (int attempt = 0; attempt < 60; ++attempt) {
    double worst = 2.0;
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      worst = std::min(worst, (base + pert.row(i).transpose()).norm());
    }
    if (worst > 0.25) break;
    pert *= 0.7;
  }
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    u.values.row(i) = u.metric->project(base + pert.row(i).transpose()).transpose();
  }
  return u;
}

TangentField random_tangent_field(const MapField& u, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TangentField psi = project_tangent(u, low_order_field(*u.mesh, rng, 1.0));
  const double n = l2_norm(*u.mesh, psi.vectors);
  if (n > 0) psi.vectors /= n;
  return psi;
}

TangentField random_reparametrization_field(const MapField& u, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Domain vector field X(x) = a × x + curl-free part P_x(b + C x); pushforward
  // by the P1 face gradients, averaged to vertices.
  Vec3 a(gauss(rng), gauss(rng), gauss(rng));
  Vec3 b(gauss(rng), gauss(rng), gauss(rng));
  const SphereMesh& mesh = *u.mesh;
  MatX push = MatX::Zero(mesh.num_vertices(), 4);
  VecX wsum = VecX::Zero(mesh.num_vertices());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const auto G = mesh.face_gradient(u.values, f);
    Vec3 xc = Vec3::Zero();
    for (int k = 0; k < 3; ++k) xc += mesh.vertices.row(mesh.faces(f, k)).transpose();
    xc.normalize();
    const Vec3 X = a.cross(xc) + (b - b.dot(xc) * xc);
    const double c1 = X.dot(mesh.face_t1.row(f).transpose());
    const double c2 = X.dot(mesh.face_t2.row(f).transpose());
    const Vec4 du = c1 * G.row(0).transpose() + c2 * G.row(1).transpose();
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.faces(f, k);
      push.row(v) += mesh.face_areas[f] * du.transpose();
      wsum[v] += mesh.face_areas[f];
    }
  }
  for (int i = 0; i < mesh.num_vertices(); ++i) push.row(i) /= wsum[i];
  TangentField psi = project_tangent(u, push);
  const double n = l2_norm(mesh, psi.vectors);
  if (n > 0) psi.vectors /= n;
  return psi;
}

double l2_distance(const MapField& a, const MapField& b) {
  return l2_norm(*a.mesh, a.values - b.values);
}

double linf_distance(const MapField& a, const MapField& b) {
  double worst = 0.0;
  for (int i = 0; i < a.num_vertices(); ++i) {
    worst = std::max(worst, (a.values.row(i) - b.values.row(i)).norm());
  }
  return worst;
}

double l2_norm(const SphereMesh& mesh, const MatX& field) {
  double s = 0.0;
  for (int i = 0; i < field.rows(); ++i) {
    s += mesh.mass[i] * field.row(i).squaredNorm();
  }
  return std::sqrt(s);
}

}  // namespace cmcflow
