#pragma once

#include <vector>

#include "epcal/mesh.hpp"

namespace epcal {

namespace detail {

/// Closest point on triangle (a,b,c) to p, returned as barycentric
/// coordinates (w0,w1,w2) and squared distance.
inline std::pair<Vec3, double> closest_point_barycentric(const Vec3& p,
                                                         const Vec3& a,
                                                         const Vec3& b,
                                                         const Vec3& c) {
  // Ericson, Real-Time Collision Detection, section 5.1.5
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return {{1, 0, 0}, (p - a).squaredNorm()};
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return {{0, 1, 0}, (p - b).squaredNorm()};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return {{1 - v, v, 0}, (p - (a + v * ab)).squaredNorm()};
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return {{0, 0, 1}, (p - c).squaredNorm()};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return {{1 - w, 0, w}, (p - (a + w * ac)).squaredNorm()};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {{0, 1 - w, w}, (p - (b + w * (c - b))).squaredNorm()};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {{1 - v - w, v, w}, (p - (a + ab * v + ac * w)).squaredNorm()};
}

}  // namespace detail

/// Interpolate a per-vertex field of `src` at arbitrary 3D points: each
/// point is projected to its nearest source triangle and the triangle's
/// vertex values are combined barycentrically. Points further than
/// `tolerance_mm` from the surface are an error.
inline std::vector<double> barycentric_transfer(
    const TriMesh& src, const std::vector<double>& field,
    const std::vector<Vec3>& dst_points, double tolerance_mm = 1.0) {
  require(static_cast<int>(field.size()) == src.n_vertices(),
          "field size does not match source mesh");
  std::vector<double> out;
  out.reserve(dst_points.size());
  for (size_t p = 0; p < dst_points.size(); ++p) {
    double best_d2 = std::numeric_limits<double>::infinity();
    Vec3 best_bary = Vec3::Zero();
    int best_tri = -1;
    for (int t = 0; t < src.n_triangles(); ++t) {
      const auto& tri = src.triangles[t];
      auto [bary, d2] = detail::closest_point_barycentric(
          dst_points[p], src.vertices[tri[0]], src.vertices[tri[1]],
          src.vertices[tri[2]]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_bary = bary;
        best_tri = t;
      }
    }
    require(best_d2 <= tolerance_mm * tolerance_mm,
            "destination point " + std::to_string(p) +
                " is farther than tolerance from the source surface");
    const auto& tri = src.triangles[best_tri];
    out.push_back(best_bary[0] * field[tri[0]] + best_bary[1] * field[tri[1]] +
                  best_bary[2] * field[tri[2]]);
  }
  return out;
}

}  // namespace epcal
