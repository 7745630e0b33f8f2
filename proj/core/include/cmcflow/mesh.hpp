#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace cmcflow {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using MatXi = Eigen::MatrixXi;
using SpMat = Eigen::SparseMatrix<double>;

/// Triangulated unit 2-sphere with piecewise-linear differential operators.
///
/// Vertices lie on the unit sphere, faces are counterclockwise as seen from
/// outside.  The per-face frames (t1, t2) are orthonormal in the face plane
/// and oriented right-handed about the *inward* normal: with the det-based
/// volume form on the target, this makes the latitude family swept from the
/// south pole toward the north pole enclose positive volume.
struct SphereMesh {
  MatX vertices;   // V x 3, |row| = 1
  MatXi faces;     // F x 3
  VecX vertex_areas;
  VecX face_areas;
  MatX face_t1, face_t2;              // F x 3 orthonormal face frame
  MatX grad_coeff1, grad_coeff2;      // F x 3: (grad f)·t_a = sum_k coeff_a[k] f_k
  SpMat stiffness;                    // cotangent, fᵀSg ≈ ∫⟨∇f,∇g⟩
  VecX mass;                          // lumped diagonal
  SpMat bilaplacian;                  // Sᵀ M⁻¹ S (mixed biharmonic form)
  int subdivision_level = 0;
  std::vector<std::vector<int>> vertex_faces;
  // Uniform direction grid over [-1,1]³ accelerating nearest-vertex queries.
  int grid_res = 0;
  std::vector<std::vector<int>> grid_cells;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
  int num_edges() const { return (3 * num_faces()) / 2; }
  int euler_characteristic() const { return num_vertices() - num_edges() + num_faces(); }

  /// Face gradient of per-vertex data (V x N) in the face frame: returns the
  /// pair (u_{x1}, u_{x2}) as rows of a 2 x N matrix.
  Eigen::Matrix<double, 2, Eigen::Dynamic> face_gradient(const MatX& values, int f) const;

  /// P1 interpolation of per-vertex data at barycentric coordinates within face f.
  Eigen::VectorXd interpolate(const MatX& values, int f, const Vec3& bary) const;

  /// Locate the face containing the radial projection of direction p
  /// (|p| need not be 1).  Returns face index and barycentric coordinates.
  std::pair<int, Vec3> locate(const Vec3& p) const;

  /// Vertex indices within geodesic distance `radius` of `center`.
  std::vector<int> local_ball_indices(const Vec3& center, double radius) const;

  /// Area-weighted average of per-face scalars onto vertices.
  VecX faces_to_vertices(const VecX& per_face) const;
};

/// Icosahedron subdivided `subdivision_level` times, vertices reprojected to
/// the unit sphere.  Deterministic; level k has 10·4^k + 2 vertices and
/// 20·4^k faces.  Levels above 8 are refused (memory guard).
SphereMesh build_icosphere(int subdivision_level);

/// Assembles the differential operators on given sphere geometry.  Vertices
/// must be unit, faces counterclockwise from outside and nondegenerate.
SphereMesh build_mesh(MatX vertices, MatXi faces, int subdivision_level = 0);

/// One uniform subdivision step.  The parent's vertices are a prefix of the
/// child's, so per-vertex data prolongates by interpolating edge midpoints.
SphereMesh subdivide(const SphereMesh& mesh);

/// Midpoint prolongation of per-vertex data from `coarse` to its subdivision.
MatX prolongate(const SphereMesh& coarse, const SphereMesh& fine, const MatX& values);

/// Coordinate-list text dump of a sparse operator (one "i j value" per line).
void dump_operator(const SpMat& op, const std::string& path);

std::vector<int> local_ball_indices(const SphereMesh& mesh, const Vec3& center, double radius);

}  // namespace cmcflow
