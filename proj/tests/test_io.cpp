#include <doctest.h>

#include "cmcflow/ply.hpp"
#include "cmcflow/record_io.hpp"
#include "cmcflow/flow.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace cmcflow;

namespace {
namespace fs = std::filesystem;

std::shared_ptr<MetricModel> metric() {
  static std::shared_ptr<MetricModel> g = round_s3();
  return g;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cmcflow_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("map PLY roundtrip is bit-exact") {
  TempDir tmp;
  const auto& m = cached_icosphere(2);
  const MapField u = geodesic_sphere_map(m, metric(), 0.7);
  const std::string path = (tmp.path / "map.ply").string();
  write_map_ply(u, path);
  const MapField back = read_map_ply(path, metric());
  CHECK(back.mesh->subdivision_level == 2);
  CHECK((back.values - u.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mesh PLY roundtrip") {
  TempDir tmp;
  const SphereMesh m = build_icosphere(2);
  const std::string path = (tmp.path / "mesh.ply").string();
  write_mesh_ply(m, path);
  const SphereMesh back = read_mesh_ply(path);
  CHECK(back.num_vertices() == m.num_vertices());
  CHECK((back.vertices - m.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.faces - m.faces).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("corrupt PLY reports the byte offset") {
  TempDir tmp;
  const auto& m = cached_icosphere(1);
  const MapField u = equator_map(m, metric());
  const std::string path = (tmp.path / "map.ply").string();
  write_map_ply(u, path);

  // Truncate the body.
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 24);
  try {
    read_map_ply(path, metric());
    FAIL("expected PlyError");
  } catch (const PlyError& e) {
    CHECK(e.byte_offset > 0);
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }

  // Garbage header.
  const std::string bad = (tmp.path / "bad.ply").string();
  std::ofstream(bad) << "not a ply\n";
  CHECK_THROWS_AS(read_map_ply(bad, metric()), PlyError);
}

TEST_CASE("operator dump is a readable coordinate list") {
  TempDir tmp;
  const SphereMesh m = build_icosphere(1);
  const std::string path = (tmp.path / "stiffness.txt").string();
  dump_operator(m.stiffness, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("# 42 42", 0) == 0);
  int i, j;
  double v;
  REQUIRE((in >> i >> j >> v));
  CHECK(i >= 0);
  CHECK(j >= 0);
}

TEST_CASE("record JSON roundtrip and re-validation") {
  const auto& m = cached_icosphere(2);
  FlowConfig cfg;
  cfg.max_iterations = 5;
  const CriticalPointRecord rec = descend(equator_map(m, metric()), 0.0, 0.0, 0.05, cfg);
  const std::string text = to_json(rec, "map.ply");
  const StoredRecord stored = parse_record_json(text);
  CHECK(stored.H == rec.H);
  CHECK(stored.map_file == "map.ply");
  CHECK_NOTHROW(revalidate_record(stored, rec.map));

  StoredRecord tampered = stored;
  tampered.cmc_residual_norm += 0.1;
  CHECK_THROWS(revalidate_record(tampered, rec.map));
}

TEST_CASE("r3 export PLY") {
  TempDir tmp;
  const SphereMesh m = build_icosphere(1);
  const std::string path = (tmp.path / "r3.ply").string();
  write_r3_ply(m.vertices, m.faces, path);
  CHECK(fs::file_size(path) > 0);
}
