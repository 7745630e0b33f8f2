#pragma once

#include "cmcflow/fields.hpp"
#include "cmcflow/mesh.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmcflow {

/// Parse failure with the byte offset of the offending data.
struct PlyError : std::runtime_error {
  PlyError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset = 0;
};

/// Binary little-endian PLY, float64 positions.
void write_mesh_ply(const SphereMesh& mesh, const std::string& path);
SphereMesh read_mesh_ply(const std::string& path);

/// Map fields as PLY with four float64 position properties x0..x3 plus the
/// domain faces; the domain icosphere level is recorded as a comment so the
/// field can be rebound to its (deterministic) mesh on load.
void write_map_ply(const MapField& u, const std::string& path);
MapField read_map_ply(const std::string& path, std::shared_ptr<const MetricModel> metric);
/// Reads just the values and level without rebuilding the mesh.
std::pair<MatX, int> read_map_ply_raw(const std::string& path);

/// R³ point/mesh export for viewing (positions x,y,z).
void write_r3_ply(const MatX& positions, const MatXi& faces, const std::string& path);
std::pair<MatX, MatXi> read_r3_ply(const std::string& path);

/// Domain positions plus named per-vertex double attributes (eigenfields,
/// densities) for viewing.
void write_vertex_attributes_ply(const SphereMesh& mesh, const MatX& attributes,
                                 const std::vector<std::string>& names, const std::string& path);

/// Process-lifetime cache of deterministic icospheres, keyed by level.
const SphereMesh& cached_icosphere(int level);

}  // namespace cmcflow
