#pragma once

#include <vector>

#include "epcal/distance.hpp"

namespace epcal {

/// Measurement-site design on a mesh.
struct DesignSites {
  std::vector<int> vertices;
  double exclusion_cm = 0.0;
};

namespace detail {

/// Approximate most-distant pair by alternating farthest-point sweeps.
inline std::pair<int, int> distant_pair(const Matrix& emb,
                                        const std::vector<int>& idx) {
  int a = 0;
  auto farthest_from = [&](int p) {
    int best = 0;
    double best_d = -1.0;
    for (size_t q = 0; q < idx.size(); ++q) {
      const double d = (emb.row(idx[q]) - emb.row(idx[p])).squaredNorm();
      if (d > best_d) {
        best_d = d;
        best = static_cast<int>(q);
      }
    }
    return best;
  };
  int b = farthest_from(a);
  for (int it = 0; it < 6; ++it) {
    const int a2 = farthest_from(b);
    if (a2 == a) break;
    a = a2;
    std::swap(a, b);
  }
  if (a > b) std::swap(a, b);
  return {a, b};
}

}  // namespace detail

/// Maximin design over biharmonic distance among vertices further than
/// `exclusion_cm` (graph-geodesic) from any boundary vertex. Greedy
/// seeding from a most-distant admissible pair (seed 0) or from a
/// seed-chosen start vertex (nonzero seeds give distinct designs), then
/// exchange passes until no single swap improves the minimum pairwise
/// distance. Deterministic for a fixed seed (ties break toward lower
/// vertex index).
inline DesignSites maximin_design(const TriMesh& mesh, const Eigenbasis& basis,
                                  int n, double exclusion_cm,
                                  std::uint64_t seed = 0) {
  require(n >= 1, "need at least one site");
  const int nv = mesh.n_vertices();

  std::vector<int> admissible;
  const auto boundary = mesh.boundary_vertices();
  if (!boundary.empty() && exclusion_cm > 0) {
    const auto dist = graph_geodesic(mesh, boundary);
    for (int v = 0; v < nv; ++v)
      if (dist[v] > 10.0 * exclusion_cm) admissible.push_back(v);
  } else {
    for (int v = 0; v < nv; ++v) admissible.push_back(v);
  }
  const int na = static_cast<int>(admissible.size());
  require(na >= n, "fewer admissible vertices (" + std::to_string(na) +
                       ") than requested sites (" + std::to_string(n) + ")");

  const Matrix emb = biharmonic_embedding(basis);
  auto dist_ab = [&](int a, int b) {
    return (emb.row(admissible[a]) - emb.row(admissible[b])).norm();
  };

  std::vector<int> chosen;  // indices into admissible
  std::vector<char> in_design(na, 0);
  std::vector<double> min_dist(na, std::numeric_limits<double>::infinity());
  auto add = [&](int a) {
    chosen.push_back(a);
    in_design[a] = 1;
    for (int q = 0; q < na; ++q)
      min_dist[q] = std::min(min_dist[q], dist_ab(q, a));
  };

  if (n == 1) {
    add(0);
  } else {
    if (seed == 0) {
      auto [a, b] = detail::distant_pair(emb, admissible);
      add(a);
      add(b);
    } else {
      Rng rng(seed);
      const int start = static_cast<int>(rng.uniform_int(na));
      int far = 0;
      double far_d = -1.0;
      for (int q = 0; q < na; ++q) {
        const double d = dist_ab(q, start);
        if (d > far_d) {
          far_d = d;
          far = q;
        }
      }
      add(start);
      add(far);
    }
    while (static_cast<int>(chosen.size()) < n) {
      int best = -1;
      double best_d = -1.0;
      for (int q = 0; q < na; ++q)
        if (!in_design[q] && min_dist[q] > best_d) {
          best_d = min_dist[q];
          best = q;
        }
      add(best);
    }
  }

  // exchange passes with incremental swap scoring
  if (n >= 2) {
    Matrix pair_d(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        pair_d(i, j) = (i == j) ? 0.0 : dist_ab(chosen[i], chosen[j]);
    auto score_of = [&]() {
      double mn = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) mn = std::min(mn, pair_d(i, j));
      return mn;
    };
    double score = score_of();
    bool improved = true;
    int passes = 0;
    while (improved && passes < 20) {
      improved = false;
      ++passes;
      for (int i = 0; i < n; ++i) {
        // min over pairs not involving slot i
        double rest_min = std::numeric_limits<double>::infinity();
        for (int p = 0; p < n; ++p)
          for (int q = p + 1; q < n; ++q)
            if (p != i && q != i) rest_min = std::min(rest_min, pair_d(p, q));
        int best_cand = -1;
        double best_score = score;
        std::vector<double> best_row;
        for (int a = 0; a < na; ++a) {
          if (in_design[a]) continue;
          double cand_min = rest_min;
          std::vector<double> row(n);
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            row[j] = dist_ab(a, chosen[j]);
            cand_min = std::min(cand_min, row[j]);
            if (cand_min <= best_score) break;
          }
          if (cand_min > best_score + 1e-15) {
            best_score = cand_min;
            best_cand = a;
            best_row = row;
            // finish filling the row for the pair table
            for (int j = 0; j < n; ++j)
              if (j != i) best_row[j] = dist_ab(a, chosen[j]);
          }
        }
        if (best_cand >= 0) {
          in_design[chosen[i]] = 0;
          in_design[best_cand] = 1;
          chosen[i] = best_cand;
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            pair_d(i, j) = best_row[j];
            pair_d(j, i) = best_row[j];
          }
          score = best_score;
          improved = true;
        }
      }
    }
  }

  DesignSites out;
  out.exclusion_cm = exclusion_cm;
  for (int c : chosen) out.vertices.push_back(admissible[c]);
  std::sort(out.vertices.begin(), out.vertices.end());
  return out;
}

}  // namespace epcal
