#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "epcal/common.hpp"

namespace epcal {

using Vec3 = Eigen::Vector3d;

/// Triangulated 2-manifold surface, coordinates in millimetres.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> labels;  // optional per-vertex labels (empty if absent)

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    return 0.5 * (vertices[tri[1]] - vertices[tri[0]])
                     .cross(vertices[tri[2]] - vertices[tri[0]])
                     .norm();
  }

  double total_area() const {
    double a = 0;
    for (int t = 0; t < n_triangles(); ++t) a += triangle_area(t);
    return a;
  }

  /// Vertices on boundary edges (edges incident to exactly one triangle).
  std::vector<int> boundary_vertices() const {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& tri : triangles) {
      for (int e = 0; e < 3; ++e) {
        int a = tri[e], b = tri[(e + 1) % 3];
        if (a > b) std::swap(a, b);
        edge_count[{a, b}]++;
      }
    }
    std::set<int> bnd;
    for (const auto& [edge, count] : edge_count) {
      if (count == 1) {
        bnd.insert(edge.first);
        bnd.insert(edge.second);
      }
    }
    return {bnd.begin(), bnd.end()};
  }

  bool is_connected() const {
    if (vertices.empty()) return true;
    std::vector<std::vector<int>> adj(vertices.size());
    for (const auto& tri : triangles) {
      for (int e = 0; e < 3; ++e) {
        adj[tri[e]].push_back(tri[(e + 1) % 3]);
        adj[tri[(e + 1) % 3]].push_back(tri[e]);
      }
    }
    std::vector<char> seen(vertices.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u : adj[v])
        if (!seen[u]) {
          seen[u] = 1;
          stack.push_back(u);
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c; });
  }
};

namespace detail {

inline void validate_mesh(const TriMesh& mesh) {
  const int nv = mesh.n_vertices();
  require(nv >= 3, "mesh has fewer than 3 vertices");
  std::map<std::pair<int, int>, int> edge_count;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i : tri)
      require(i >= 0 && i < nv,
              "invalid vertex index " + std::to_string(i) + " in triangle " +
                  std::to_string(t));
    require(tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2],
            "repeated vertex in triangle " + std::to_string(t));
    require(mesh.triangle_area(t) > 1e-12,
            "zero-area triangle " + std::to_string(t));
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edge_count[{a, b}]++;
    }
  }
  for (const auto& [edge, count] : edge_count)
    require(count <= 2, "non-manifold edge (" + std::to_string(edge.first) +
                            "," + std::to_string(edge.second) + ") shared by " +
                            std::to_string(count) + " triangles");
}

inline std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream iss(line);
  std::vector<std::string> out;
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

/// CARP text format: mesh.pts (count, then "x y z" lines) paired with
/// mesh.elem (count, then "Tr i j k region" lines). `path` may name either
/// file or the common stem.
inline TriMesh load_carp(const std::string& path, double unit_scale = 1.0) {
  std::string stem = path;
  for (const char* ext : {".pts", ".elem"}) {
    if (stem.size() > 4 && stem.substr(stem.size() - std::strlen(ext)) == ext)
      stem = stem.substr(0, stem.size() - std::strlen(ext));
  }
  std::ifstream pts(stem + ".pts");
  require(pts.good(), "cannot open " + stem + ".pts");
  std::ifstream elem(stem + ".elem");
  require(elem.good(), "cannot open " + stem + ".elem");

  TriMesh mesh;
  std::string line;
  std::getline(pts, line);
  int n_pts = 0;
  try {
    n_pts = std::stoi(line);
  } catch (...) {
    throw Error("malformed .pts header: " + line);
  }
  mesh.vertices.reserve(n_pts);
  for (int i = 0; i < n_pts; ++i) {
    require(static_cast<bool>(std::getline(pts, line)),
            ".pts truncated at vertex " + std::to_string(i));
    auto toks = detail::tokenize(line);
    require(toks.size() >= 3, "malformed .pts line: " + line);
    mesh.vertices.emplace_back(unit_scale * std::stod(toks[0]),
                               unit_scale * std::stod(toks[1]),
                               unit_scale * std::stod(toks[2]));
  }

  std::getline(elem, line);
  int n_elem = 0;
  try {
    n_elem = std::stoi(line);
  } catch (...) {
    throw Error("malformed .elem header: " + line);
  }
  mesh.triangles.reserve(n_elem);
  for (int i = 0; i < n_elem; ++i) {
    require(static_cast<bool>(std::getline(elem, line)),
            ".elem truncated at element " + std::to_string(i));
    auto toks = detail::tokenize(line);
    require(toks.size() >= 4 && toks[0] == "Tr",
            "unsupported element line: " + line);
    mesh.triangles.push_back(
        {std::stoi(toks[1]), std::stoi(toks[2]), std::stoi(toks[3])});
    mesh.labels.push_back(toks.size() >= 5 ? std::stoi(toks[4]) : 0);
  }
  detail::validate_mesh(mesh);
  return mesh;
}

/// ASCII PLY triangle mesh loader.
inline TriMesh load_ply(const std::string& path, double unit_scale = 1.0) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  std::string line;
  std::getline(in, line);
  require(line.substr(0, 3) == "ply", "not a PLY file: " + path);
  int n_verts = -1, n_faces = -1;
  bool ascii = false;
  int n_vertex_props = 0;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;
    if (toks[0] == "format") {
      ascii = toks.size() > 1 && toks[1] == "ascii";
    } else if (toks[0] == "element") {
      in_vertex_element = false;
      if (toks[1] == "vertex") {
        n_verts = std::stoi(toks[2]);
        in_vertex_element = true;
      } else if (toks[1] == "face") {
        n_faces = std::stoi(toks[2]);
      }
    } else if (toks[0] == "property" && in_vertex_element) {
      ++n_vertex_props;
    } else if (toks[0] == "end_header") {
      break;
    }
  }
  require(ascii, "only ASCII PLY is supported: " + path);
  require(n_verts > 0 && n_faces >= 0, "PLY header missing elements");

  TriMesh mesh;
  mesh.vertices.reserve(n_verts);
  for (int i = 0; i < n_verts; ++i) {
    require(static_cast<bool>(std::getline(in, line)),
            "PLY truncated at vertex " + std::to_string(i));
    auto toks = detail::tokenize(line);
    require(static_cast<int>(toks.size()) >= 3, "malformed vertex line");
    mesh.vertices.emplace_back(unit_scale * std::stod(toks[0]),
                               unit_scale * std::stod(toks[1]),
                               unit_scale * std::stod(toks[2]));
  }
  for (int i = 0; i < n_faces; ++i) {
    require(static_cast<bool>(std::getline(in, line)),
            "PLY truncated at face " + std::to_string(i));
    auto toks = detail::tokenize(line);
    require(!toks.empty(), "malformed face line");
    int n = std::stoi(toks[0]);
    require(n == 3, "non-triangular face in " + path);
    require(static_cast<int>(toks.size()) >= 4, "malformed face line");
    mesh.triangles.push_back(
        {std::stoi(toks[1]), std::stoi(toks[2]), std::stoi(toks[3])});
  }
  detail::validate_mesh(mesh);
  return mesh;
}

enum class MeshFormat { CarpPtsElem, Ply };

inline TriMesh load_mesh(const std::string& path, MeshFormat format,
                         double unit_scale = 1.0) {
  switch (format) {
    case MeshFormat::CarpPtsElem:
      return load_carp(path, unit_scale);
    case MeshFormat::Ply:
      return load_ply(path, unit_scale);
  }
  throw Error("unknown mesh format");
}

/// Guess format from extension (.ply vs .pts/.elem/stem).
inline TriMesh load_mesh_auto(const std::string& path,
                              double unit_scale = 1.0) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".ply")
    return load_ply(path, unit_scale);
  return load_carp(path, unit_scale);
}

inline void save_ply(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.n_vertices() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.n_triangles() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  out.precision(17);
  for (const auto& v : mesh.vertices)
    out << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

}  // namespace epcal
