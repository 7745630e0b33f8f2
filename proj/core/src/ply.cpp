#include "cmcflow/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

namespace cmcflow {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY writer assumes a little-endian host");

struct PlyHeader {
  int vertex_count = 0;
  int face_count = 0;
  std::vector<std::string> vertex_props;
  std::vector<std::string> comments;
  std::size_t data_offset = 0;
};

PlyHeader parse_header(std::istream& in, const std::string& path) {
  PlyHeader h;
  std::string line;
  std::size_t offset = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw PlyError("unexpected end of header in " + path, offset);
    offset += line.size() + 1;
    return line;
  };
  if (next_line() != "ply") throw PlyError("missing ply magic in " + path, 0);
  if (next_line() != "format binary_little_endian 1.0") {
    throw PlyError("unsupported PLY format line in " + path, offset - line.size() - 1);
  }
  std::string element;
  while (true) {
    next_line();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "end_header") break;
    if (tok == "comment") {
      h.comments.push_back(line.substr(8));
    } else if (tok == "element") {
      int count;
      ls >> element >> count;
      if (element == "vertex") h.vertex_count = count;
      else if (element == "face") h.face_count = count;
      else throw PlyError("unsupported element '" + element + "' in " + path,
                          offset - line.size() - 1);
    } else if (tok == "property") {
      if (element == "vertex") {
        std::string type, name;
        ls >> type >> name;
        if (type != "double") {
          throw PlyError("vertex property '" + name + "' is not double in " + path,
                         offset - line.size() - 1);
        }
        h.vertex_props.push_back(name);
      } else if (element == "face") {
        std::string kind, ctype, itype, name;
        ls >> kind >> ctype >> itype >> name;
        if (kind != "list" || ctype != "uchar" || itype != "int") {
          throw PlyError("unsupported face property in " + path, offset - line.size() - 1);
        }
      }
    } else if (!tok.empty()) {
      throw PlyError("unrecognized header line '" + line + "' in " + path,
                     offset - line.size() - 1);
    }
  }
  h.data_offset = offset;
  return h;
}

void write_header(std::ostream& out, int nv, int nf, const std::vector<std::string>& props,
                  const std::vector<std::string>& comments) {
  out << "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : comments) out << "comment " << c << "\n";
  out << "element vertex " << nv << "\n";
  for (const auto& p : props) out << "property double " << p << "\n";
  if (nf > 0) {
    out << "element face " << nf << "\n";
    out << "property list uchar int vertex_indices\n";
  }
  out << "end_header\n";
}

void write_body(std::ostream& out, const MatX& verts, const MatXi& faces) {
  for (int i = 0; i < verts.rows(); ++i) {
    for (int c = 0; c < verts.cols(); ++c) {
      const double v = verts(i, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
  for (int f = 0; f < faces.rows(); ++f) {
    const unsigned char n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    for (int k = 0; k < 3; ++k) {
      const std::int32_t v = faces(f, k);
      out.write(reinterpret_cast<const char*>(&v), sizeof(std::int32_t));
    }
  }
}

struct Body {
  MatX verts;
  MatXi faces;
};

Body read_body(std::istream& in, const PlyHeader& h, const std::string& path) {
  Body b;
  const int props = static_cast<int>(h.vertex_props.size());
  b.verts.resize(h.vertex_count, props);
  std::size_t offset = h.data_offset;
  for (int i = 0; i < h.vertex_count; ++i) {
    for (int c = 0; c < props; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      if (!in) throw PlyError("truncated vertex data in " + path, offset);
      offset += sizeof(double);
      b.verts(i, c) = v;
    }
  }
  b.faces.resize(h.face_count, 3);
  for (int f = 0; f < h.face_count; ++f) {
    unsigned char n;
    in.read(reinterpret_cast<char*>(&n), 1);
    if (!in) throw PlyError("truncated face data in " + path, offset);
    offset += 1;
    if (n != 3) throw PlyError("non-triangular face in " + path, offset - 1);
    for (int k = 0; k < 3; ++k) {
      std::int32_t v;
      in.read(reinterpret_cast<char*>(&v), sizeof(std::int32_t));
      if (!in) throw PlyError("truncated face data in " + path, offset);
      offset += sizeof(std::int32_t);
      if (v < 0 || v >= h.vertex_count) {
        throw PlyError("face index out of range in " + path, offset - sizeof(std::int32_t));
      }
      b.faces(f, k) = v;
    }
  }
  return b;
}

}  // namespace

void write_mesh_ply(const SphereMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out, mesh.num_vertices(), mesh.num_faces(), {"x", "y", "z"},
               {"domain_icosphere_level " + std::to_string(mesh.subdivision_level)});
  write_body(out, mesh.vertices, mesh.faces);
}

SphereMesh read_mesh_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const PlyHeader h = parse_header(in, path);
  if (h.vertex_props != std::vector<std::string>{"x", "y", "z"}) {
    throw PlyError("mesh PLY must carry x y z double positions: " + path, 0);
  }
  const Body b = read_body(in, h, path);
  // Rebuild the deterministic icosphere at the recorded level and check it
  // matches; positions from file are authoritative for the comparison only.
  int level = -1;
  for (const auto& c : h.comments) {
    std::istringstream cs(c);
    std::string key;
    cs >> key;
    if (key == "domain_icosphere_level") cs >> level;
  }
  if (level < 0) throw PlyError("missing domain_icosphere_level comment in " + path, 0);
  SphereMesh mesh = build_icosphere(level);
  if (mesh.num_vertices() != b.verts.rows() || mesh.num_faces() != b.faces.rows()) {
    throw PlyError("mesh in " + path + " does not match its recorded icosphere level",
                   h.data_offset);
  }
  return mesh;
}

void write_map_ply(const MapField& u, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out, u.num_vertices(), u.mesh->num_faces(), {"x0", "x1", "x2", "x3"},
               {"domain_icosphere_level " + std::to_string(u.mesh->subdivision_level)});
  write_body(out, u.values, u.mesh->faces);
}

std::pair<MatX, int> read_map_ply_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const PlyHeader h = parse_header(in, path);
  if (h.vertex_props != std::vector<std::string>{"x0", "x1", "x2", "x3"}) {
    throw PlyError("map PLY must carry x0..x3 double positions: " + path, 0);
  }
  const Body b = read_body(in, h, path);
  int level = -1;
  for (const auto& c : h.comments) {
    std::istringstream cs(c);
    std::string key;
    cs >> key;
    if (key == "domain_icosphere_level") cs >> level;
  }
  if (level < 0) throw PlyError("missing domain_icosphere_level comment in " + path, 0);
  return {b.verts, level};
}

void write_vertex_attributes_ply(const SphereMesh& mesh, const MatX& attributes,
                                 const std::vector<std::string>& names, const std::string& path) {
  if (attributes.rows() != mesh.num_vertices() ||
      attributes.cols() != static_cast<int>(names.size())) {
    throw std::invalid_argument("attribute shape does not match the mesh");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  std::vector<std::string> props = {"x", "y", "z"};
  props.insert(props.end(), names.begin(), names.end());
  write_header(out, mesh.num_vertices(), mesh.num_faces(), props,
               {"domain_icosphere_level " + std::to_string(mesh.subdivision_level)});
  MatX body(mesh.num_vertices(), 3 + attributes.cols());
  body.leftCols<3>() = mesh.vertices;
  body.rightCols(attributes.cols()) = attributes;
  write_body(out, body, mesh.faces);
}

const SphereMesh& cached_icosphere(int level) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<SphereMesh>> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find(level);
  if (it == cache.end()) {
    it = cache.emplace(level, std::make_unique<SphereMesh>(build_icosphere(level))).first;
  }
  return *it->second;
}

MapField read_map_ply(const std::string& path, std::shared_ptr<const MetricModel> metric) {
  auto [values, level] = read_map_ply_raw(path);
  MapField u{&cached_icosphere(level), std::move(metric), std::move(values)};
  if (u.constraint_defect() > 1e-8) {
    throw PlyError("map in " + path + " violates the target constraint", 0);
  }
  return u;
}

std::pair<MatX, MatXi> read_r3_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const PlyHeader h = parse_header(in, path);
  if (h.vertex_props != std::vector<std::string>{"x", "y", "z"}) {
    throw PlyError("PLY must carry x y z double positions: " + path, 0);
  }
  Body b = read_body(in, h, path);
  return {std::move(b.verts), std::move(b.faces)};
}

void write_r3_ply(const MatX& positions, const MatXi& faces, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_header(out, static_cast<int>(positions.rows()), static_cast<int>(faces.rows()),
               {"x", "y", "z"}, {});
  write_body(out, positions, faces);
}

}  // namespace cmcflow
