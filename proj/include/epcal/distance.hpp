#pragma once

#include <limits>
#include <queue>
#include <vector>

#include "epcal/laplacian.hpp"

namespace epcal {

/// Spectral embedding for biharmonic distance: row i holds
/// phi_k(i)/lambda_k for k >= 2 (the constant mode is skipped), so that
/// d_BH(i,j) is the Euclidean distance between rows.
inline Matrix biharmonic_embedding(const Eigenbasis& basis) {
  require(basis.K() >= 2, "biharmonic distance needs K >= 2");
  const int n = basis.n_vertices();
  const int k = basis.K() - 1;
  Matrix emb(n, k);
  for (int j = 1; j < basis.K(); ++j) {
    require(basis.eigenvalues[j] > 0, "nonpositive eigenvalue beyond mode 1");
    emb.col(j - 1) = basis.functions.col(j) / basis.eigenvalues[j];
  }
  return emb;
}

/// Biharmonic distance between vertices i and j, truncated at the
/// available K modes: d^2 = sum_{k>=2} (phi_k(i)-phi_k(j))^2 / lambda_k^2.
inline double biharmonic_distance(const Eigenbasis& basis, int i, int j) {
  require(i >= 0 && i < basis.n_vertices() && j >= 0 && j < basis.n_vertices(),
          "vertex index out of bounds");
  if (i == j) return 0.0;
  double d2 = 0.0;
  for (int k = 1; k < basis.K(); ++k) {
    const double diff = basis.functions(i, k) - basis.functions(j, k);
    d2 += diff * diff / (basis.eigenvalues[k] * basis.eigenvalues[k]);
  }
  return std::sqrt(d2);
}

/// Dijkstra shortest-path distance (mm) along mesh edges from the nearest
/// source vertex. Edge weights are Euclidean edge lengths.
inline std::vector<double> graph_geodesic(const TriMesh& mesh,
                                          const std::vector<int>& sources) {
  require(!sources.empty(), "graph_geodesic needs at least one source");
  const int n = mesh.n_vertices();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& tri : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
      adj[a].emplace_back(b, len);
      adj[b].emplace_back(a, len);
    }
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (int s : sources) {
    require(s >= 0 && s < n, "source vertex out of bounds");
    dist[s] = 0.0;
    heap.emplace(0.0, s);
  }
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (const auto& [u, w] : adj[v]) {
      if (d + w < dist[u]) {
        dist[u] = d + w;
        heap.emplace(dist[u], u);
      }
    }
  }
  return dist;
}

}  // namespace epcal
