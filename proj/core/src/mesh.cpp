#include "cmcflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace cmcflow {

namespace {

constexpr int kMaxSubdivisionLevel = 8;

size_t grid_cell_of(const SphereMesh& mesh, const Vec3& d) {
  const int n = mesh.grid_res;
  auto axis = [&](double x) {
    return std::clamp(static_cast<int>((x + 1.0) * 0.5 * n), 0, n - 1);
  };
  return (static_cast<size_t>(axis(d[0])) * n + axis(d[1])) * n + axis(d[2]);
}

void append_icosahedron(MatX& V, MatXi& F) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  V.resize(12, 3);
  V << -1, t, 0, 1, t, 0, -1, -t, 0, 1, -t, 0,
       0, -1, t, 0, 1, t, 0, -1, -t, 0, 1, -t,
       t, 0, -1, t, 0, 1, -t, 0, -1, -t, 0, 1;
  for (int i = 0; i < 12; ++i) V.row(i).normalize();
  F.resize(20, 3);
  F << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11,
       1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7, 1, 8,
       3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9,
       4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9, 8, 1;
}

void assemble_operators(SphereMesh& mesh) {
  const int nv = mesh.num_vertices();
  const int nf = mesh.num_faces();
  mesh.face_areas.resize(nf);
  mesh.face_t1.resize(nf, 3);
  mesh.face_t2.resize(nf, 3);
  mesh.grad_coeff1.resize(nf, 3);
  mesh.grad_coeff2.resize(nf, 3);
  mesh.vertex_areas = VecX::Zero(nv);
  mesh.vertex_faces.assign(nv, {});

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(nf) * 9);

  for (int f = 0; f < nf; ++f) {
    const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
    const Vec3 p0 = mesh.vertices.row(i0), p1 = mesh.vertices.row(i1), p2 = mesh.vertices.row(i2);
    const Vec3 e01 = p1 - p0, e02 = p2 - p0;
    const Vec3 n = e01.cross(e02);
    const double area = 0.5 * n.norm();
    if (!(area > 1e-14)) {
      throw std::runtime_error("degenerate (zero-area) triangle in face " + std::to_string(f));
    }
    const Vec3 centroid = (p0 + p1 + p2) / 3.0;
    if (n.dot(centroid) <= 0.0) {
      throw std::runtime_error("face " + std::to_string(f) + " is not counterclockwise from outside");
    }
    mesh.face_areas[f] = area;

    // Frame right-handed about the inward normal (see header).
    const Vec3 nh = n.normalized();
    const Vec3 t1 = e01.normalized();
    const Vec3 t2 = t1.cross(nh);
    mesh.face_t1.row(f) = t1;
    mesh.face_t2.row(f) = t2;

    // 2D coordinates in the (t1, t2) frame; P1 shape-function gradients.
    const double x1 = e01.dot(t1), y1 = e01.dot(t2);
    const double x2 = e02.dot(t1), y2 = e02.dot(t2);
    const double det = x1 * y2 - x2 * y1;
    // grad lambda_1 = ( y2, -x2)/det, grad lambda_2 = (-y1, x1)/det
    const double g1x = y2 / det, g1y = -x2 / det;
    const double g2x = -y1 / det, g2y = x1 / det;
    const double g0x = -g1x - g2x, g0y = -g1y - g2y;
    mesh.grad_coeff1.row(f) << g0x, g1x, g2x;
    mesh.grad_coeff2.row(f) << g0y, g1y, g2y;

    // Stiffness from the same shape gradients: S_kl += A ⟨g_k, g_l⟩, which is
    // exactly the cotangent formula and keeps fᵀSf = Σ_f A |∇f|² to roundoff.
    const double gx[3] = {g0x, g1x, g2x};
    const double gy[3] = {g0y, g1y, g2y};
    const int idx[3] = {i0, i1, i2};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        trips.emplace_back(idx[a], idx[b], area * (gx[a] * gx[b] + gy[a] * gy[b]));
      }
    }
    for (int a = 0; a < 3; ++a) {
      mesh.vertex_areas[idx[a]] += area / 3.0;
      mesh.vertex_faces[idx[a]].push_back(f);
    }
  }

  mesh.stiffness.resize(nv, nv);
  mesh.stiffness.setFromTriplets(trips.begin(), trips.end());
  mesh.stiffness.makeCompressed();
  mesh.mass = mesh.vertex_areas;

  SpMat minv_s = mesh.stiffness;
  for (int k = 0; k < minv_s.outerSize(); ++k) {
    for (SpMat::InnerIterator it(minv_s, k); it; ++it) {
      it.valueRef() /= mesh.mass[it.row()];
    }
  }
  mesh.bilaplacian = (SpMat(mesh.stiffness.transpose()) * minv_s).pruned();
  mesh.bilaplacian.makeCompressed();

  // Nearest-vertex grid: cells comparable to the edge length.
  mesh.grid_res = std::max(1, static_cast<int>(std::floor(std::sqrt(nv / 6.0))));
  mesh.grid_cells.assign(static_cast<size_t>(mesh.grid_res) * mesh.grid_res * mesh.grid_res, {});
  for (int i = 0; i < nv; ++i) {
    mesh.grid_cells[grid_cell_of(mesh, mesh.vertices.row(i).transpose())].push_back(i);
  }
}

}  // namespace

SphereMesh build_icosphere(int subdivision_level) {
  if (subdivision_level < 0) throw std::invalid_argument("subdivision_level must be nonnegative");
  if (subdivision_level > kMaxSubdivisionLevel) {
    throw std::length_error("subdivision_level above capacity guard (" +
                            std::to_string(kMaxSubdivisionLevel) + ")");
  }
  SphereMesh mesh;
  append_icosahedron(mesh.vertices, mesh.faces);
  mesh.subdivision_level = 0;
  assemble_operators(mesh);
  for (int l = 0; l < subdivision_level; ++l) mesh = subdivide(mesh);
  return mesh;
}

SphereMesh build_mesh(MatX vertices, MatXi faces, int subdivision_level) {
  SphereMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.faces = std::move(faces);
  mesh.subdivision_level = subdivision_level;
  assemble_operators(mesh);
  return mesh;
}

SphereMesh subdivide(const SphereMesh& mesh) {
  const int nv = mesh.num_vertices();
  const int nf = mesh.num_faces();
  SphereMesh out;
  out.subdivision_level = mesh.subdivision_level + 1;
  out.vertices.resize(nv + mesh.num_edges(), 3);
  out.vertices.topRows(nv) = mesh.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  int next = nv;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec3 m = (mesh.vertices.row(a) + mesh.vertices.row(b)).normalized();
    out.vertices.row(next) = m;
    midpoint.emplace(key, next);
    return next++;
  };
  out.faces.resize(4 * nf, 3);
  for (int f = 0; f < nf; ++f) {
    const int v0 = mesh.faces(f, 0), v1 = mesh.faces(f, 1), v2 = mesh.faces(f, 2);
    const int m01 = mid(v0, v1), m12 = mid(v1, v2), m02 = mid(v0, v2);
    out.faces.row(4 * f + 0) << v0, m01, m02;
    out.faces.row(4 * f + 1) << v1, m12, m01;
    out.faces.row(4 * f + 2) << v2, m02, m12;
    out.faces.row(4 * f + 3) << m01, m12, m02;
  }
  assemble_operators(out);
  return out;
}

MatX prolongate(const SphereMesh& coarse, const SphereMesh& fine, const MatX& values) {
  if (fine.subdivision_level != coarse.subdivision_level + 1 ||
      values.rows() != coarse.num_vertices()) {
    throw std::invalid_argument("prolongate: fine mesh is not the subdivision of coarse");
  }
  MatX out(fine.num_vertices(), values.cols());
  out.topRows(coarse.num_vertices()) = values;
  // Recover each midpoint's parents from the coarse faces, in the same
  // deterministic order used by subdivide().
  std::map<std::pair<int, int>, int> seen;
  int next = coarse.num_vertices();
  for (int f = 0; f < coarse.num_faces(); ++f) {
    const int v[3] = {coarse.faces(f, 0), coarse.faces(f, 1), coarse.faces(f, 2)};
    const std::pair<int, int> edges[3] = {std::minmax(v[0], v[1]), std::minmax(v[1], v[2]),
                                          std::minmax(v[0], v[2])};
    for (const auto& e : edges) {
      if (seen.emplace(e, next).second) {
        out.row(next) = 0.5 * (values.row(e.first) + values.row(e.second));
        ++next;
      }
    }
  }
  return out;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> SphereMesh::face_gradient(const MatX& values, int f) const {
  Eigen::Matrix<double, 2, Eigen::Dynamic> g(2, values.cols());
  g.setZero();
  for (int k = 0; k < 3; ++k) {
    const int v = faces(f, k);
    g.row(0) += grad_coeff1(f, k) * values.row(v);
    g.row(1) += grad_coeff2(f, k) * values.row(v);
  }
  return g;
}

Eigen::VectorXd SphereMesh::interpolate(const MatX& values, int f, const Vec3& bary) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(values.cols());
  for (int k = 0; k < 3; ++k) out += bary[k] * values.row(faces(f, k)).transpose();
  return out;
}

std::pair<int, Vec3> SphereMesh::locate(const Vec3& p) const {
  const Vec3 d = p.normalized();
  int best_v = -1;
  double best_dot = -2.0;
  // Grid neighborhood first, widening rings until a candidate appears.
  const int n = grid_res;
  auto axis = [&](double x) { return std::clamp(static_cast<int>((x + 1.0) * 0.5 * n), 0, n - 1); };
  const int cx = axis(d[0]), cy = axis(d[1]), cz = axis(d[2]);
  for (int ring = 1; ring <= std::max(2, n) && best_v < 0; ++ring) {
    for (int ix = std::max(0, cx - ring); ix <= std::min(n - 1, cx + ring); ++ix) {
      for (int iy = std::max(0, cy - ring); iy <= std::min(n - 1, cy + ring); ++iy) {
        for (int iz = std::max(0, cz - ring); iz <= std::min(n - 1, cz + ring); ++iz) {
          for (int i : grid_cells[(static_cast<size_t>(ix) * n + iy) * n + iz]) {
            const double c = vertices.row(i).dot(d);
            if (c > best_dot) {
              best_dot = c;
              best_v = i;
            }
          }
        }
      }
    }
  }
  if (best_v < 0) {
    for (int i = 0; i < num_vertices(); ++i) {
      const double c = vertices.row(i).dot(d);
      if (c > best_dot) {
        best_dot = c;
        best_v = i;
      }
    }
  }
  // Breadth-first search around the nearest vertex; radial barycentric test.
  auto bary_of = [&](int f) -> Vec3 {
    Eigen::Matrix3d A;
    for (int k = 0; k < 3; ++k) A.col(k) = vertices.row(faces(f, k)).transpose();
    Vec3 b = A.partialPivLu().solve(d);
    const double s = b.sum();
    return s != 0.0 ? Vec3(b / s) : Vec3(1, 1, 1) / 3.0;
  };
  std::vector<int> frontier = vertex_faces[best_v];
  std::vector<char> visited(num_faces(), 0);
  int best_f = -1;
  Vec3 best_b = Vec3::Zero();
  double best_neg = -1e30;
  for (int depth = 0; depth < 4 && !frontier.empty(); ++depth) {
    std::vector<int> next;
    for (int f : frontier) {
      if (visited[f]) continue;
      visited[f] = 1;
      const Vec3 b = bary_of(f);
      const double worst = b.minCoeff();
      if (worst > best_neg) {
        best_neg = worst;
        best_f = f;
        best_b = b;
      }
      if (worst >= -1e-12) {
        return {f, b.cwiseMax(0.0) / b.cwiseMax(0.0).sum()};
      }
      for (int k = 0; k < 3; ++k) {
        for (int g : vertex_faces[faces(f, k)]) {
          if (!visited[g]) next.push_back(g);
        }
      }
    }
    frontier = std::move(next);
  }
  return {best_f, best_b.cwiseMax(0.0) / std::max(best_b.cwiseMax(0.0).sum(), 1e-300)};
}

std::vector<int> SphereMesh::local_ball_indices(const Vec3& center, double radius) const {
  if (!(radius > 0.0) || !(radius < M_PI)) {
    throw std::invalid_argument("local_ball_indices: radius must lie in (0, pi)");
  }
  const Vec3 c = center.normalized();
  std::vector<int> out;
  for (int i = 0; i < num_vertices(); ++i) {
    const double d = std::acos(std::clamp(vertices.row(i).dot(c), -1.0, 1.0));
    if (d <= radius) out.push_back(i);
  }
  return out;
}

VecX SphereMesh::faces_to_vertices(const VecX& per_face) const {
  VecX out = VecX::Zero(num_vertices());
  for (int f = 0; f < num_faces(); ++f) {
    for (int k = 0; k < 3; ++k) {
      out[faces(f, k)] += face_areas[f] / 3.0 * per_face[f];
    }
  }
  return out.cwiseQuotient(vertex_areas);
}

std::vector<int> local_ball_indices(const SphereMesh& mesh, const Vec3& center, double radius) {
  return mesh.local_ball_indices(center, radius);
}

void dump_operator(const SpMat& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# " << op.rows() << " " << op.cols() << " " << op.nonZeros() << "\n";
  char buf[64];
  for (int k = 0; k < op.outerSize(); ++k) {
    for (SpMat::InnerIterator it(op, k); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", static_cast<int>(it.row()),
                    static_cast<int>(it.col()), it.value());
      out << buf;
    }
  }
}

}  // namespace cmcflow
