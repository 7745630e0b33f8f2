#include "cmcflow/energy.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cmcflow {

namespace {

// Gauss-Legendre nodes/weights on [0,1].
void gauss01(int n, std::vector<double>& x, std::vector<double>& w) {
  switch (n) {
    case 1:
      x = {0.5};
      w = {1.0};
      return;
    case 2: {
      const double d = 0.5 / std::sqrt(3.0);
      x = {0.5 - d, 0.5 + d};
      w = {0.5, 0.5};
      return;
    }
    case 3: {
      const double d = 0.5 * std::sqrt(3.0 / 5.0);
      x = {0.5 - d, 0.5, 0.5 + d};
      w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
      return;
    }
    case 4: {
      const double a = 0.5 * std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double b = 0.5 * std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double wa = (18.0 + std::sqrt(30.0)) / 72.0;
      const double wb = (18.0 - std::sqrt(30.0)) / 72.0;
      x = {0.5 - b, 0.5 - a, 0.5 + a, 0.5 + b};
      w = {wb, wa, wa, wb};
      return;
    }
    case 5: {
      const double x1 = 0.5 * 0.9061798459386640 + 0.5;
      const double x2 = 0.5 * 0.5384693101056831 + 0.5;
      x = {1.0 - x1, 1.0 - x2, 0.5, x2, x1};
      w = {0.5 * 0.2369268850561891, 0.5 * 0.4786286704993665, 0.5 * 0.5688888888888889,
           0.5 * 0.4786286704993665, 0.5 * 0.2369268850561891};
      return;
    }
    default:
      throw std::invalid_argument("gauss01: unsupported order");
  }
}

Vec4 project_unit(const Vec4& v) { return v / v.norm(); }

// dΠ_v(h) for the radial projection Π(v) = v/|v|.
Vec4 dprojection(const Vec4& v, const Vec4& h) {
  const double n = v.norm();
  const Vec4 vn = v / n;
  return (h - vn.dot(h) * vn) / n;
}

struct FaceGeometry {
  Vec4 y;        // Π(face mean)
  Vec4 g1, g2;   // frame gradients of u
  Vec4 mean;     // raw face mean of u
};

FaceGeometry face_geometry(const MapField& u, int f) {
  FaceGeometry out;
  const SphereMesh& mesh = *u.mesh;
  Vec4 mean = Vec4::Zero();
  out.g1.setZero();
  out.g2.setZero();
  for (int k = 0; k < 3; ++k) {
    const Vec4 v = u.at(mesh.faces(f, k));
    mean += v / 3.0;
    out.g1 += mesh.grad_coeff1(f, k) * v;
    out.g2 += mesh.grad_coeff2(f, k) * v;
  }
  out.mean = mean;
  out.y = project_unit(mean);
  return out;
}

}  // namespace

double default_delta0() { return 0.5; }

double dirichlet(const MapField& u) {
  const SphereMesh& mesh = *u.mesh;
  if (u.metric->unit_energy_weight()) {
    double s = 0.0;
    for (int c = 0; c < 4; ++c) {
      s += u.values.col(c).dot(mesh.stiffness * u.values.col(c));
    }
    return 0.5 * s;
  }
  double s = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const FaceGeometry fg = face_geometry(u, f);
    s += mesh.face_areas[f] * u.metric->energy_weight(fg.y) *
         (fg.g1.squaredNorm() + fg.g2.squaredNorm());
  }
  return 0.5 * s;
}

double biharmonic_part(const MapField& u, double eps) {
  if (eps == 0.0) return 0.0;
  const SphereMesh& mesh = *u.mesh;
  double s = 0.0;
  for (int c = 0; c < 4; ++c) {
    const VecX lap = (mesh.stiffness * u.values.col(c)).cwiseQuotient(mesh.mass);
    if (u.metric->unit_energy_weight()) {
      s += lap.dot(mesh.mass.cwiseProduct(lap));
    } else {
      for (int i = 0; i < mesh.num_vertices(); ++i) {
        s += mesh.mass[i] * u.metric->energy_weight(u.at(i)) * lap[i] * lap[i];
      }
    }
  }
  return 0.5 * eps * eps * s;
}

double perturbed_energy(const MapField& u, double eps) {
  if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
  return dirichlet(u) + biharmonic_part(u, eps);
}

double volume_increment(const MapField& u0, const MapField& u1, double delta0, int s_gauss) {
  const SphereMesh& mesh = *u0.mesh;
  const double dist = linf_distance(u0, u1);
  if (dist >= delta0) {
    throw LocalityError("volume increment ill-defined: step of size " + std::to_string(dist) +
                        " exceeds locality bound " + std::to_string(delta0));
  }
  std::vector<double> xs, ws;
  gauss01(s_gauss, xs, ws);

  const int nv = mesh.num_vertices();
  MatX w_s(nv, 4), dw_s(nv, 4);
  double total = 0.0;
  for (int q = 0; q < s_gauss; ++q) {
    const double s = xs[q];
    for (int i = 0; i < nv; ++i) {
      const Vec4 a = u0.at(i), b = u1.at(i);
      const Vec4 v = (1.0 - s) * a + s * b;
      w_s.row(i) = project_unit(v).transpose();
      dw_s.row(i) = dprojection(v, b - a).transpose();
    }
    double slice = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
      Vec4 mean = Vec4::Zero(), dmean = Vec4::Zero(), g1 = Vec4::Zero(), g2 = Vec4::Zero();
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        mean += w_s.row(v).transpose() / 3.0;
        dmean += dw_s.row(v).transpose() / 3.0;
        g1 += mesh.grad_coeff1(f, k) * w_s.row(v).transpose();
        g2 += mesh.grad_coeff2(f, k) * w_s.row(v).transpose();
      }
      const Vec4 y = project_unit(mean);
      slice += mesh.face_areas[f] * u0.metric->volume_form(y, dmean, g1, g2);
    }
    total += ws[q] * slice;
  }
  return total;
}

double volume_increment_safe(const MapField& u0, const MapField& u1, double delta0, int s_gauss) {
  if (linf_distance(u0, u1) < delta0) {
    return volume_increment(u0, u1, delta0, s_gauss);
  }
  MapField mid{u0.mesh, u0.metric, 0.5 * (u0.values + u1.values)};
  mid.reproject();
  return volume_increment_safe(u0, mid, delta0, s_gauss) +
         volume_increment_safe(mid, u1, delta0, s_gauss);
}

EnergyBreakdown tracked_energy(const MapField& u, double tracked_volume, double H, double eps) {
  EnergyBreakdown b;
  b.dirichlet = dirichlet(u);
  b.biharmonic_part = biharmonic_part(u, eps);
  b.d_eps = b.dirichlet + b.biharmonic_part;
  b.tracked_volume = tracked_volume;
  b.H = H;
  b.eps = eps;
  b.total = b.d_eps + H * tracked_volume;
  return b;
}

Gradient gradient(const MapField& u, double H, double eps) {
  if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();
  Gradient g;
  g.raw = MatX::Zero(nv, 4);

  const bool unit_w = u.metric->unit_energy_weight();
  if (unit_w) {
    for (int c = 0; c < 4; ++c) {
      g.raw.col(c) = mesh.stiffness * u.values.col(c);
      if (eps > 0.0) {
        g.raw.col(c) += eps * eps * (mesh.bilaplacian * u.values.col(c));
      }
    }
  } else {
    // Dirichlet block, differentiated through the face-mean projection.
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const FaceGeometry fg = face_geometry(u, f);
      const double A = mesh.face_areas[f];
      const double w = u.metric->energy_weight(fg.y);
      const Vec4 dw = dprojection(fg.mean, u.metric->energy_weight_gradient(fg.y));
      const double e2 = fg.g1.squaredNorm() + fg.g2.squaredNorm();
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        g.raw.row(v) += A * w *
                        (mesh.grad_coeff1(f, k) * fg.g1 + mesh.grad_coeff2(f, k) * fg.g2)
                            .transpose();
        g.raw.row(v) += (0.5 * A * e2 / 3.0) * dw.transpose();
      }
    }
    if (eps > 0.0) {
      MatX lap(nv, 4);
      for (int c = 0; c < 4; ++c) {
        lap.col(c) = (mesh.stiffness * u.values.col(c)).cwiseQuotient(mesh.mass);
      }
      VecX wv(nv);
      for (int i = 0; i < nv; ++i) wv[i] = u.metric->energy_weight(u.at(i));
      for (int c = 0; c < 4; ++c) {
        g.raw.col(c) +=
            eps * eps * (mesh.stiffness.transpose() * wv.cwiseProduct(lap.col(c)));
      }
      for (int i = 0; i < nv; ++i) {
        g.raw.row(i) += 0.5 * eps * eps * mesh.mass[i] * lap.row(i).squaredNorm() *
                        u.metric->energy_weight_gradient(u.at(i)).transpose();
      }
    }
  }

  if (H != 0.0) {
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const FaceGeometry fg = face_geometry(u, f);
      const Vec4 r = u.metric->volume_form_riesz(fg.y, fg.g1, fg.g2);
      const double c = H * mesh.face_areas[f] / 3.0;
      for (int k = 0; k < 3; ++k) {
        g.raw.row(mesh.faces(f, k)) += c * r.transpose();
      }
    }
  }

  g.tangent.resizeLike(g.raw);
  double dual = 0.0;
  for (int i = 0; i < nv; ++i) {
    const Vec4 y = u.at(i);
    const Vec4 r = g.raw.row(i).transpose();
    const Vec4 t = r - y.dot(r) * y;
    g.tangent.row(i) = t.transpose();
    dual += t.squaredNorm() / mesh.mass[i];
  }
  g.tangent_norm = std::sqrt(dual);
  return g;
}

namespace {

void require_embedded(const MapField& u, const char* what) {
  if (!u.metric->embedded_round()) {
    throw std::runtime_error(std::string(what) +
                             " is only available for the embedded round target model");
  }
}

}  // namespace

SpMat hessian_matrix(const MapField& u, double H, double eps, double grad_tol,
                     bool* criticality_warning) {
  require_embedded(u, "second variation");
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();

  if (criticality_warning) {
    *criticality_warning = gradient(u, H, eps).tangent_norm > grad_tol;
  }

  std::vector<Eigen::Triplet<double>> trips;
  const SpMat& S = mesh.stiffness;
  const SpMat& B = mesh.bilaplacian;
  trips.reserve(static_cast<size_t>(S.nonZeros() + (eps > 0 ? B.nonZeros() : 0)) * 4 + nv * 4 +
                static_cast<size_t>(mesh.num_faces()) * 150);

  // ψᵀ(S + ε²B)ξ per component.
  for (int k = 0; k < S.outerSize(); ++k) {
    for (SpMat::InnerIterator it(S, k); it; ++it) {
      for (int c = 0; c < 4; ++c) {
        trips.emplace_back(4 * it.row() + c, 4 * it.col() + c, it.value());
      }
    }
  }
  if (eps > 0.0) {
    for (int k = 0; k < B.outerSize(); ++k) {
      for (SpMat::InnerIterator it(B, k); it; ++it) {
        for (int c = 0; c < 4; ++c) {
          trips.emplace_back(4 * it.row() + c, 4 * it.col() + c, eps * eps * it.value());
        }
      }
    }
  }

  // Constraint curvature: -⟨(Ku)_i, u_i⟩ ⟨ψ_i, ξ_i⟩, the Δu·Δ(A_u(ψ,ξ)) and
  // ⟨∇u, ∇(A_u(ψ,ξ))⟩ blocks evaluated exactly at the discrete level.
  MatX Ku(nv, 4);
  for (int c = 0; c < 4; ++c) {
    Ku.col(c) = S * u.values.col(c);
    if (eps > 0.0) Ku.col(c) += eps * eps * (B * u.values.col(c));
  }
  for (int i = 0; i < nv; ++i) {
    const double kappa = -Ku.row(i).dot(u.values.row(i));
    for (int c = 0; c < 4; ++c) trips.emplace_back(4 * i + c, 4 * i + c, kappa);
  }

  if (H != 0.0) {
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const FaceGeometry fg = face_geometry(u, f);
      const double A = mesh.face_areas[f];
      const Mat4 P = Mat4::Identity() - fg.y * fg.y.transpose();
      const Vec4 q = cross4(fg.g1, fg.g2, fg.y);

      // H ∫ (dP)_u(ψ,ξ)·Q(u_x1,u_x2): diagonal blocks -(H A/3)⟨u_k,q⟩ I.
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        const double d = -H * A / 3.0 * u.at(v).dot(q);
        for (int c = 0; c < 4; ++c) trips.emplace_back(4 * v + c, 4 * v + c, d);
      }

      // H ∫ ψ·(Q(D_x1 ξ, u_x2) + Q(u_x1, D_x2 ξ)); symmetrized below.
      Mat4 M1, M2;
      for (int d = 0; d < 4; ++d) {
        M1.col(d) = cross4(P * Vec4::Unit(d), fg.g2, fg.y);
        M2.col(d) = cross4(fg.g1, P * Vec4::Unit(d), fg.y);
      }
      for (int k = 0; k < 3; ++k) {
        const int vk = mesh.faces(f, k);
        for (int l = 0; l < 3; ++l) {
          const int vl = mesh.faces(f, l);
          const Mat4 block =
              (H * A / 3.0) * (mesh.grad_coeff1(f, l) * M1 + mesh.grad_coeff2(f, l) * M2);
          for (int c = 0; c < 4; ++c) {
            for (int d = 0; d < 4; ++d) {
              trips.emplace_back(4 * vk + c, 4 * vl + d, block(c, d));
            }
          }
        }
      }
    }
  }

  SpMat Hm(4 * nv, 4 * nv);
  Hm.setFromTriplets(trips.begin(), trips.end());
  SpMat Ht = Hm.transpose();
  Hm = 0.5 * (Hm + Ht);
  Hm.makeCompressed();
  return Hm;
}

MatX hessian_apply(const MapField& u, const MatX& psi, double H, double eps) {
  require_embedded(u, "second variation");
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();
  MatX out = MatX::Zero(nv, 4);

  for (int c = 0; c < 4; ++c) {
    out.col(c) = mesh.stiffness * psi.col(c);
    if (eps > 0.0) out.col(c) += eps * eps * (mesh.bilaplacian * psi.col(c));
  }
  MatX Ku(nv, 4);
  for (int c = 0; c < 4; ++c) {
    Ku.col(c) = mesh.stiffness * u.values.col(c);
    if (eps > 0.0) Ku.col(c) += eps * eps * (mesh.bilaplacian * u.values.col(c));
  }
  for (int i = 0; i < nv; ++i) {
    out.row(i) -= Ku.row(i).dot(u.values.row(i)) * psi.row(i);
  }

  if (H != 0.0) {
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const FaceGeometry fg = face_geometry(u, f);
      const double A = mesh.face_areas[f];
      const Mat4 P = Mat4::Identity() - fg.y * fg.y.transpose();
      const Vec4 q = cross4(fg.g1, fg.g2, fg.y);

      Vec4 psi_bar = Vec4::Zero(), p1 = Vec4::Zero(), p2 = Vec4::Zero();
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        psi_bar += psi.row(v).transpose() / 3.0;
        p1 += mesh.grad_coeff1(f, k) * psi.row(v).transpose();
        p2 += mesh.grad_coeff2(f, k) * psi.row(v).transpose();
      }

      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        out.row(v) += (-H * A / 3.0 * u.at(v).dot(q)) * psi.row(v);
      }

      // ½(T + Tᵀ) of the Q-derivative term.
      const Vec4 forward = cross4(P * p1, fg.g2, fg.y) + cross4(fg.g1, P * p2, fg.y);
      const Vec4 m1 = P * cross4(fg.g2, psi_bar, fg.y);   // adjoint through D_x1 slot
      const Vec4 m2 = P * cross4(psi_bar, fg.g1, fg.y);   // adjoint through D_x2 slot
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        out.row(v) += (0.5 * H * A / 3.0) * forward.transpose();
        out.row(v) += 0.5 * H * A *
                      (mesh.grad_coeff1(f, k) * m1 + mesh.grad_coeff2(f, k) * m2).transpose();
      }
    }
  }
  return out;
}

double hessian_intrinsic_form(const MapField& u, const MatX& psi, const MatX& xi, double H,
                              double eps) {
  require_embedded(u, "second variation");
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();
  double form = 0.0;

  if (eps > 0.0) {
    for (int c = 0; c < 4; ++c) {
      form += eps * eps * psi.col(c).dot(mesh.bilaplacian * xi.col(c));
    }
    MatX Bu(nv, 4);
    for (int c = 0; c < 4; ++c) Bu.col(c) = mesh.bilaplacian * u.values.col(c);
    for (int i = 0; i < nv; ++i) {
      form -= eps * eps * Bu.row(i).dot(u.values.row(i)) * psi.row(i).dot(xi.row(i));
    }
  }

  for (int f = 0; f < mesh.num_faces(); ++f) {
    const FaceGeometry fg = face_geometry(u, f);
    const double A = mesh.face_areas[f];
    const Mat4 P = Mat4::Identity() - fg.y * fg.y.transpose();
    Vec4 psi_bar = Vec4::Zero(), xi_bar = Vec4::Zero();
    Vec4 dpsi[2] = {Vec4::Zero(), Vec4::Zero()}, dxi[2] = {Vec4::Zero(), Vec4::Zero()};
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.faces(f, k);
      psi_bar += psi.row(v).transpose() / 3.0;
      xi_bar += xi.row(v).transpose() / 3.0;
      dpsi[0] += mesh.grad_coeff1(f, k) * psi.row(v).transpose();
      dpsi[1] += mesh.grad_coeff2(f, k) * psi.row(v).transpose();
      dxi[0] += mesh.grad_coeff1(f, k) * xi.row(v).transpose();
      dxi[1] += mesh.grad_coeff2(f, k) * xi.row(v).transpose();
    }
    // ⟨Dψ, Dξ⟩ with the pullback connection D = P_u ∘ ∇.
    for (int a = 0; a < 2; ++a) {
      form += A * (P * dpsi[a]).dot(P * dxi[a]);
    }
    // -R(ψ, ∇u, ∇u, ξ), round curvature.
    const Vec4 g[2] = {fg.g1, fg.g2};
    for (int a = 0; a < 2; ++a) {
      form -= A * (psi_bar.dot(xi_bar) * g[a].squaredNorm() -
                   psi_bar.dot(g[a]) * g[a].dot(xi_bar));
    }
    if (H != 0.0) {
      const Vec4 q = cross4(fg.g1, fg.g2, fg.y);
      form += 0.5 * H * A *
              (psi_bar.dot(cross4(P * dxi[0], fg.g2, fg.y) + cross4(fg.g1, P * dxi[1], fg.y)) +
               xi_bar.dot(cross4(P * dpsi[0], fg.g2, fg.y) + cross4(fg.g1, P * dpsi[1], fg.y)));
      double dp = 0.0;
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces(f, k);
        dp -= psi.row(v).dot(xi.row(v)) / 3.0 * u.at(v).dot(q);
      }
      form += H * A * dp;
    }
  }
  return form;
}

CmcResidual cmc_residual(const MapField& u, double H) {
  const SphereMesh& mesh = *u.mesh;
  const int nv = mesh.num_vertices();
  CmcResidual r;
  r.field = MatX::Zero(nv, 4);
  for (int c = 0; c < 4; ++c) {
    r.field.col(c) = -(mesh.stiffness * u.values.col(c)).cwiseQuotient(mesh.mass);
  }
  MatX correction = MatX::Zero(nv, 4);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const FaceGeometry fg = face_geometry(u, f);
    const Vec4 t = u.metric->tension_correction(fg.y, fg.g1, fg.g2);
    const Vec4 s = u.metric->cmc_star(fg.y, fg.g1, fg.g2);
    const double w = mesh.face_areas[f] / 3.0;
    for (int k = 0; k < 3; ++k) {
      correction.row(mesh.faces(f, k)) += w * (t - H * s).transpose();
    }
  }
  for (int i = 0; i < nv; ++i) {
    r.field.row(i) += correction.row(i) / mesh.vertex_areas[i];
  }
  r.norm = l2_norm(mesh, r.field);
  return r;
}

HopfResidual hopf_residual(const MapField& u) {
  const SphereMesh& mesh = *u.mesh;
  const double D = dirichlet(u);
  HopfResidual out;
  if (D < 1e-12) {
    out.degenerate = true;
    return out;
  }
  double s = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const FaceGeometry fg = face_geometry(u, f);
    const double re = 0.25 * (fg.g1.squaredNorm() - fg.g2.squaredNorm());
    const double im = 0.5 * fg.g1.dot(fg.g2);
    s += mesh.face_areas[f] * (re * re + im * im);
  }
  out.norm = std::sqrt(s) / D;
  return out;
}

VecX face_gradient_energy(const MapField& u) {
  const SphereMesh& mesh = *u.mesh;
  VecX out(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const FaceGeometry fg = face_geometry(u, f);
    out[f] = fg.g1.squaredNorm() + fg.g2.squaredNorm();
  }
  return out;
}

VecX vertex_energy_density(const MapField& u, double eps) {
  const SphereMesh& mesh = *u.mesh;
  VecX density = mesh.faces_to_vertices(face_gradient_energy(u));
  if (eps > 0.0) {
    for (int c = 0; c < 4; ++c) {
      const VecX lap = (mesh.stiffness * u.values.col(c)).cwiseQuotient(mesh.mass);
      density += eps * eps * lap.cwiseAbs2();
    }
  }
  return density;
}

}  // namespace cmcflow
