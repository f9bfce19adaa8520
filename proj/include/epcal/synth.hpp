#pragma once

#include <cmath>
#include <map>

#include "epcal/mesh.hpp"

namespace epcal {

/// Icosphere: subdivided icosahedron projected to radius `radius` (mm).
/// Subdivision level n gives 10*4^n + 2 vertices.
inline TriMesh make_icosphere(int subdivisions, double radius = 1.0) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.vertices.reserve(verts.size());
  for (const auto& v : verts) mesh.vertices.push_back(radius * v);
  mesh.triangles = std::move(faces);
  return mesh;
}

/// Flat rectangle [0,Lx] x [0,Ly] in the z=0 plane, regular grid of
/// (nx+1)*(ny+1) vertices, each cell split into two triangles.
inline TriMesh make_rectangle(double lx, double ly, int nx, int ny) {
  TriMesh mesh;
  mesh.vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.emplace_back(lx * i / nx, ly * j / ny, 0.0);
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      // alternate the diagonal to avoid directional bias
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      } else {
        mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
        mesh.triangles.push_back(
            {vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
      }
    }
  return mesh;
}

/// Remove all triangles whose centroid lies within angular radius
/// `cap_deg` of direction `dir`, then drop unreferenced vertices.
/// Cutting caps from a sphere produces an atrium-like surface with holes
/// (vein/valve openings).
inline TriMesh cut_cap(const TriMesh& mesh, const Vec3& dir, double cap_deg) {
  const Vec3 d = dir.normalized();
  const double cos_cap = std::cos(cap_deg * M_PI / 180.0);
  TriMesh out;
  std::vector<int> remap(mesh.n_vertices(), -1);
  for (const auto& tri : mesh.triangles) {
    Vec3 c = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] +
              mesh.vertices[tri[2]]) /
             3.0;
    if (c.normalized().dot(d) > cos_cap) continue;
    std::array<int, 3> t;
    for (int e = 0; e < 3; ++e) {
      int v = tri[e];
      if (remap[v] < 0) {
        remap[v] = out.n_vertices();
        out.vertices.push_back(mesh.vertices[v]);
      }
      t[e] = remap[v];
    }
    out.triangles.push_back(t);
    out.labels.push_back(
        mesh.labels.empty() ? 0
                            : mesh.labels[&tri - mesh.triangles.data()]);
  }
  return out;
}

/// Atrium-like synthetic surface: a sphere of radius `radius_mm`, gently
/// deformed, with five caps removed (four vein-like openings plus one
/// larger valve-like opening).
inline TriMesh make_atrium_like(int subdivisions, double radius_mm,
                                double valve_deg = 24.0,
                                double vein_deg = 10.0) {
  TriMesh sphere = make_icosphere(subdivisions, 1.0);
  // mild ellipsoidal deformation with a low-order bump
  for (auto& v : sphere.vertices) {
    double bump = 1.0 + 0.15 * v.z() * v.x() + 0.1 * v.y() * v.y();
    v = radius_mm * bump * Vec3(1.15 * v.x(), 1.0 * v.y(), 0.9 * v.z());
  }
  TriMesh m = cut_cap(sphere, Vec3(0, 0, -1), valve_deg);   // valve
  m = cut_cap(m, Vec3(0.8, 0.5, 0.6), vein_deg);            // veins
  m = cut_cap(m, Vec3(-0.8, 0.5, 0.6), vein_deg);
  m = cut_cap(m, Vec3(0.8, -0.5, 0.6), vein_deg);
  m = cut_cap(m, Vec3(-0.8, -0.5, 0.6), vein_deg);
  if (m.labels.size() != m.triangles.size())
    m.labels.assign(m.triangles.size(), 0);
  return m;
}

}  // namespace epcal
