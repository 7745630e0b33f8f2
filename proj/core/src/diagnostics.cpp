#include "cmcflow/diagnostics.hpp"

#include "cmcflow/eigs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmcflow {

namespace {

std::vector<std::vector<int>> vertex_neighbors(const SphereMesh& mesh) {
  std::vector<std::vector<int>> nbr(mesh.num_vertices());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int a = 0; a < 3; ++a) {
      const int i = mesh.faces(f, a), j = mesh.faces(f, (a + 1) % 3);
      nbr[i].push_back(j);
      nbr[j].push_back(i);
    }
  }
  for (auto& v : nbr) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return nbr;
}

}  // namespace

ConcentrationReport concentration_scan(const MapField& u, double eps, double r, double eta0) {
  if (eps > r) {
    throw std::invalid_argument("concentration scan requires eps <= r");
  }
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();
  const double ball = 4.0 * r;
  const double cos_ball = std::cos(std::min(ball, M_PI - 1e-12));
  const VecX density = vertex_energy_density(u, eps);
  const VecX cell = density.cwiseProduct(mesh.vertex_areas);

  ConcentrationReport rep;
  rep.radius = r;
  rep.eta0 = eta0;
  rep.local_energies.resize(nv);

  const auto nbr = vertex_neighbors(mesh);
  std::vector<int> stamp(nv, -1);
  std::vector<int> stack;
  for (int c = 0; c < nv; ++c) {
    const Vec3 center = mesh.vertices.row(c).transpose();
    double e = 0.0;
    stack.assign(1, c);
    stamp[c] = c;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      e += cell[i];
      for (int j : nbr[i]) {
        if (stamp[j] == c) continue;
        stamp[j] = c;
        if (mesh.vertices.row(j).dot(center) >= cos_ball) stack.push_back(j);
      }
    }
    rep.local_energies[c] = e;
    if (e > rep.max_local_energy) {
      rep.max_local_energy = e;
      rep.argmax_center = c;
    }
    if (e > eta0) rep.flagged.push_back(c);
  }
  return rep;
}

namespace {

struct PatchSample {
  MatX values;  // (n*n) x 4
  double h;     // grid spacing in rescaled chart units
};

PatchSample sample_patch(const MapField& u, const Vec3& center, const Vec3& b1, const Vec3& b2,
                         double t, int n) {
  PatchSample p;
  p.values.resize(n * n, 4);
  p.h = 2.0 / (n - 1);
  for (int j = 0; j < n; ++j) {
    const double eta = -1.0 + j * p.h;
    for (int i = 0; i < n; ++i) {
      const double xi = -1.0 + i * p.h;
      const double rho = t * std::hypot(xi, eta);
      Vec3 point = center;
      if (rho > 1e-15) {
        const Vec3 dir = (xi * b1 + eta * b2).normalized();
        point = std::cos(rho) * center + std::sin(rho) * dir;
      }
      auto [f, bary] = u.mesh->locate(point);
      p.values.row(j * n + i) =
          u.metric->project(u.mesh->interpolate(u.values, f, bary)).transpose();
    }
  }
  return p;
}

struct PatchEnergy {
  double total = 0.0;
  double dirichlet = 0.0;
  double hopf_num = 0.0;
  double cmc_sq = 0.0;
  double area = 0.0;
};

PatchEnergy patch_energy(const PatchSample& p, int n, double rescaled_eps, double H,
                         const MetricModel& metric) {
  PatchEnergy e;
  const double h = p.h;
  auto val = [&](int i, int j) -> Vec4 { return p.values.row(j * n + i).transpose(); };
  for (int j = 1; j + 1 < n; ++j) {
    for (int i = 1; i + 1 < n; ++i) {
      const double xi = -1.0 + i * h, eta = -1.0 + j * h;
      if (xi * xi + eta * eta > 1.0) continue;
      const Vec4 c = val(i, j);
      const Vec4 gx = (val(i + 1, j) - val(i - 1, j)) / (2.0 * h);
      const Vec4 gy = (val(i, j + 1) - val(i, j - 1)) / (2.0 * h);
      const Vec4 lap =
          (val(i + 1, j) + val(i - 1, j) + val(i, j + 1) + val(i, j - 1) - 4.0 * c) / (h * h);
      const double cellw = h * h;
      const double grad2 = gx.squaredNorm() + gy.squaredNorm();
      e.dirichlet += 0.5 * cellw * grad2;
      e.total += 0.5 * cellw * (grad2 + rescaled_eps * rescaled_eps * lap.squaredNorm());
      const double re = 0.25 * (gx.squaredNorm() - gy.squaredNorm());
      const double im = 0.5 * gx.dot(gy);
      e.hopf_num += cellw * (re * re + im * im);
      const Vec4 y = c / c.norm();
      const Vec4 res = lap + metric.tension_correction(y, gx, gy) - H * metric.cmc_star(y, gx, gy);
      e.cmc_sq += cellw * res.squaredNorm();
      e.area += cellw;
    }
  }
  return e;
}

}  // namespace

BlowupPatch blowup_rescale(const MapField& u, int center_vertex, double t_upper, double eps,
                           double eta0, double H, int grid_n) {
  const SphereMesh& mesh = *u.mesh;
  const Vec3 center = mesh.vertices.row(center_vertex).transpose();
  Vec3 seed = std::abs(center[2]) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  const Vec3 b1 = (seed - seed.dot(center) * center).normalized();
  const Vec3 b2 = center.cross(b1);
  const double target = eta0 / 3.0;

  auto energy_at = [&](double t) {
    const PatchSample p = sample_patch(u, center, b1, b2, t, grid_n);
    return patch_energy(p, grid_n, eps / t, H, *u.metric).total;
  };

  double hi = std::min(t_upper, 1.2);
  if (energy_at(hi) < target) {
    throw NoConcentrationError(
        "no rescaling radius reaches the target local energy: no concentration at this center");
  }
  double lo = hi;
  while (energy_at(lo) >= target) {
    lo *= 0.5;
    if (lo < 1e-8) break;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (energy_at(mid) < target) lo = mid;
    else hi = mid;
  }
  const double t = 0.5 * (lo + hi);

  BlowupPatch patch;
  patch.grid_n = grid_n;
  patch.t_scale = t;
  patch.rescaled_eps = eps / t;
  const PatchSample p = sample_patch(u, center, b1, b2, t, grid_n);
  const PatchEnergy e = patch_energy(p, grid_n, patch.rescaled_eps, H, *u.metric);
  patch.energy = e.total;
  patch.dirichlet_energy = e.dirichlet;
  patch.hopf = e.dirichlet > 1e-12 ? std::sqrt(e.hopf_num) / e.dirichlet : 0.0;
  patch.cmc_residual = std::sqrt(e.cmc_sq);
  patch.values = p.values;
  return patch;
}

VecX weighted_area_weight(const MapField& u, double H) {
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();
  const bool unit_w = u.metric->unit_energy_weight();

  // Per-face g-density and g-unit normal, averaged onto vertices.
  VecX density = VecX::Zero(nv);
  MatX normal = MatX::Zero(nv, 4);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    Vec4 mean = Vec4::Zero(), g1 = Vec4::Zero(), g2 = Vec4::Zero();
    for (int k = 0; k < 3; ++k) {
      const Vec4 v = u.at(mesh.faces(f, k));
      mean += v / 3.0;
      g1 += mesh.grad_coeff1(f, k) * v;
      g2 += mesh.grad_coeff2(f, k) * v;
    }
    const Vec4 y = mean / mean.norm();
    const double w = unit_w ? 1.0 : u.metric->energy_weight(y);
    const double dens = w * (g1.squaredNorm() + g2.squaredNorm());
    const Vec4 q = u.metric->cross(y, g1, g2);
    const double qn = std::sqrt(std::max(u.metric->metric_dot(y, q, q), 0.0));
    const double aw = mesh.face_areas[f] / 3.0;
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.faces(f, k);
      density[v] += aw * dens;
      if (qn > 1e-14) normal.row(v) += aw * dens * (q / qn).transpose();
    }
  }
  density = density.cwiseQuotient(mesh.vertex_areas);

  const double mean_density = density.dot(mesh.vertex_areas) / mesh.vertex_areas.sum();
  VecX weight(nv);
  for (int i = 0; i < nv; ++i) {
    if (density[i] < 1e-8 * mean_density) {
      weight[i] = 0.0;  // factor |∇u|²/2 vanishes at branch points anyway
      continue;
    }
    Vec4 n = normal.row(i).transpose();
    const Vec4 y = u.at(i);
    n -= y.dot(n) * y;
    const double g_norm = std::sqrt(std::max(u.metric->metric_dot(y, n, n), 1e-300));
    n /= g_norm;
    const double ric = u.metric->ricci(y, n, n);
    weight[i] = 0.5 * density[i] * (0.5 * H * H + ric);
  }
  return weight;
}

namespace {

// Per-vertex orthonormal tangent bases stacked into the sparse 4V x 3V map Z.
SpMat tangent_basis(const MapField& u) {
  const int nv = u.num_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(nv) * 12);
  for (int i = 0; i < nv; ++i) {
    const Vec4 y = u.at(i);
    // Deterministic Gram-Schmidt of the coordinate axes against y.
    Mat4 basis;
    int found = 0;
    for (int c = 0; c < 4 && found < 3; ++c) {
      Vec4 v = Vec4::Unit(c) - y[c] * y;
      for (int p = 0; p < found; ++p) v -= basis.col(p).dot(v) * basis.col(p);
      const double n = v.norm();
      if (n > 1e-6) basis.col(found++) = v / n;
    }
    if (found < 3) throw std::runtime_error("tangent basis construction failed");
    for (int p = 0; p < 3; ++p) {
      for (int c = 0; c < 4; ++c) {
        trips.emplace_back(4 * i + c, 3 * i + p, basis(c, p));
      }
    }
  }
  SpMat Z(4 * nv, 3 * nv);
  Z.setFromTriplets(trips.begin(), trips.end());
  return Z;
}

}  // namespace

IndexReport morse_index(const MapField& u, double H, double eps, int k, IndexForm which,
                        double null_tol) {
  const SphereMesh& mesh = *u.mesh;
  IndexReport rep;
  rep.form = which;

  if (which == IndexForm::WeightedArea) {
    const VecX w = weighted_area_weight(u, H);
    SpMat A = mesh.stiffness;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      t.emplace_back(i, i, -mesh.vertex_areas[i] * w[i]);
    }
    SpMat D(mesh.num_vertices(), mesh.num_vertices());
    D.setFromTriplets(t.begin(), t.end());
    A = A + D;
    const EigResult eig = smallest_eigenpairs(A, mesh.mass, k);
    rep.eigenvalues = eig.values;
    rep.eigenfields = eig.vectors;
    rep.residuals = eig.residuals;
  } else {
    bool warn = false;
    const SpMat Hm = hessian_matrix(u, H, eps, 1e-3, &warn);
    rep.criticality_warning = warn;
    const SpMat Z = tangent_basis(u);
    const SpMat A = SpMat(Z.transpose()) * Hm * Z;
    VecX m(3 * u.num_vertices());
    for (int i = 0; i < u.num_vertices(); ++i) {
      m.segment<3>(3 * i).setConstant(mesh.mass[i]);
    }
    const EigResult eig = smallest_eigenpairs(A, m, k);
    rep.eigenvalues = eig.values;
    rep.residuals = eig.residuals;
    rep.eigenfields = MatX(Z) * eig.vectors;
  }

  for (int j = 0; j < rep.eigenvalues.size(); ++j) {
    if (rep.eigenvalues[j] < -null_tol) ++rep.index;
    else if (std::abs(rep.eigenvalues[j]) <= null_tol) ++rep.nullity;
  }
  return rep;
}

IndexComparison index_comparison_check(const MapField& u, double H, int k) {
  IndexComparison out;
  out.b_index = morse_index(u, H, 0.0, k, IndexForm::WeightedArea).index;
  out.e_index = morse_index(u, H, 0.0, k, IndexForm::SecondVariation).index;
  out.holds = out.b_index <= out.e_index;
  return out;
}

EnergyBound energy_bound_check(const MapField& u, double H, double c0) {
  if (!(c0 > 0.0)) throw std::invalid_argument("c0 must be positive");
  (void)H;
  EnergyBound out;
  out.dirichlet = dirichlet(u);
  out.bound = 8.0 * M_PI / c0;
  out.ratio = out.dirichlet / out.bound;
  out.holds = out.dirichlet <= out.bound * (1.0 + 1e-12);
  return out;
}

}  // namespace cmcflow
