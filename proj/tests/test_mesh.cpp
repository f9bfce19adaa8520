#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "epcal/mesh.hpp"
#include "epcal/synth.hpp"

using namespace epcal;

namespace {
std::string tmp_path(const std::string& name) {
  return std::string("/tmp/epcal_mesh_") + name;
}
}  // namespace

TEST_CASE("triangle area and totals") {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  m.labels = {0};
  CHECK(m.triangle_area(0) == Catch::Approx(0.5));
  CHECK(m.total_area() == Catch::Approx(0.5));
}

TEST_CASE("icosphere has closed topology and expected area") {
  const TriMesh m = make_icosphere(3, 1.0);
  CHECK(m.n_vertices() == 642);
  CHECK(m.n_triangles() == 1280);
  CHECK(m.boundary_vertices().empty());
  CHECK(m.is_connected());
  // inscribed polyhedron area slightly below 4*pi
  CHECK(m.total_area() == Catch::Approx(4 * M_PI).epsilon(0.01));
  for (const auto& v : m.vertices)
    CHECK(v.norm() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("rectangle boundary detection") {
  const TriMesh m = make_rectangle(2.0, 1.0, 20, 10);
  CHECK(m.n_vertices() == 21 * 11);
  CHECK(m.total_area() == Catch::Approx(2.0));
  const auto bnd = m.boundary_vertices();
  CHECK(bnd.size() == 2 * 20 + 2 * 10);  // perimeter vertices
  CHECK(m.is_connected());
}

TEST_CASE("mesh validation rejects malformed input") {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};

  SECTION("index out of bounds") {
    m.triangles = {{0, 1, 3}};
    m.labels = {0};
    CHECK_THROWS_AS(detail::validate_mesh(m), Error);
  }
  SECTION("repeated vertex in a triangle") {
    m.triangles = {{0, 1, 1}};
    m.labels = {0};
    CHECK_THROWS_AS(detail::validate_mesh(m), Error);
  }
  SECTION("degenerate zero-area triangle") {
    m.vertices.push_back({2, 0, 0});
    m.triangles = {{0, 1, 3}};  // collinear
    m.labels = {0};
    CHECK_THROWS_AS(detail::validate_mesh(m), Error);
  }
  SECTION("non-manifold edge") {
    m.vertices.push_back({0, 0, 1});
    m.vertices.push_back({0, 0, -1});
    m.triangles = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}};
    m.labels = {0, 0, 0};
    CHECK_THROWS_AS(detail::validate_mesh(m), Error);
  }
}

TEST_CASE("PLY save/load round trip") {
  const TriMesh m = make_icosphere(2, 1.7);
  const std::string path = tmp_path("roundtrip.ply");
  save_ply(m, path);
  const TriMesh back = load_ply(path);
  REQUIRE(back.n_vertices() == m.n_vertices());
  REQUIRE(back.n_triangles() == m.n_triangles());
  for (int i = 0; i < m.n_vertices(); ++i)
    CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-9);
  for (int t = 0; t < m.n_triangles(); ++t)
    CHECK(back.triangles[t] == m.triangles[t]);
  std::remove(path.c_str());
}

TEST_CASE("CARP pts/elem loading with unit scale") {
  const std::string stem = tmp_path("carp");
  {
    std::ofstream pts(stem + ".pts");
    pts << "3\n0 0 0\n1000 0 0\n0 1000 0\n";  // micrometres
    std::ofstream elem(stem + ".elem");
    elem << "1\nTr 0 1 2 7\n";
  }
  const TriMesh m = load_carp(stem, 1e-3);  // to mm
  REQUIRE(m.n_vertices() == 3);
  REQUIRE(m.n_triangles() == 1);
  CHECK(m.vertices[1][0] == Catch::Approx(1.0));
  CHECK(m.labels[0] == 7);
  std::remove((stem + ".pts").c_str());
  std::remove((stem + ".elem").c_str());
}

TEST_CASE("format auto-detection by extension") {
  const TriMesh m = make_rectangle(1.0, 1.0, 3, 3);
  const std::string path = tmp_path("auto.ply");
  save_ply(m, path);
  const TriMesh back = load_mesh_auto(path);
  CHECK(back.n_vertices() == m.n_vertices());
  std::remove(path.c_str());
}

TEST_CASE("atrium-like synthetic mesh has boundaries and is connected") {
  const TriMesh m = make_atrium_like(4, 30.0);
  CHECK(m.n_vertices() > 2000);
  CHECK(!m.boundary_vertices().empty());  // cut valve/vein openings
  CHECK(m.is_connected());
  CHECK_NOTHROW(detail::validate_mesh(m));
}
