#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "epcal/common.hpp"

namespace epcal {

/// Latin hypercube design: n points over named parameter ranges, one
/// point per equal-width bin in every 1D projection.
struct LHSDesign {
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> ranges;
  Eigen::MatrixXd points;  // n x d, in parameter units

  int n() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

/// Maximin-optimized LHS: random bin permutations per dimension, then
/// accept-only-improving random pair swaps (which preserve the LHS
/// projection property) for a fixed iteration budget. Deterministic per
/// seed.
inline LHSDesign latin_hypercube(
    int n, const std::vector<std::pair<std::string, std::pair<double, double>>>& ranges,
    std::uint64_t seed, int swap_iterations = 2000) {
  require(n >= 2, "LHS needs n >= 2");
  require(!ranges.empty(), "LHS needs at least one parameter");
  const int d = static_cast<int>(ranges.size());
  Rng rng(seed);

  // unit-cube design: bin midpoint jittered within the bin
  Eigen::MatrixXd unit(n, d);
  for (int j = 0; j < d; ++j) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    for (int i = 0; i < n; ++i)
      unit(i, j) = (perm[i] + rng.uniform()) / n;
  }

  auto min_dist2 = [&]() {
    double mn = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        mn = std::min(mn, (unit.row(a) - unit.row(b)).squaredNorm());
    return mn;
  };
  double score = min_dist2();
  for (int it = 0; it < swap_iterations; ++it) {
    const int j = static_cast<int>(rng.uniform_int(d));
    const int a = static_cast<int>(rng.uniform_int(n));
    int b = static_cast<int>(rng.uniform_int(n));
    if (a == b) continue;
    std::swap(unit(a, j), unit(b, j));
    const double s = min_dist2();
    if (s > score) {
      score = s;
    } else {
      std::swap(unit(a, j), unit(b, j));
    }
  }

  LHSDesign design;
  design.points.resize(n, d);
  for (int j = 0; j < d; ++j) {
    design.names.push_back(ranges[j].first);
    design.ranges.push_back(ranges[j].second);
    const auto [lo, hi] = ranges[j].second;
    design.points.col(j) = lo + (hi - lo) * unit.col(j).array();
  }
  return design;
}

}  // namespace epcal
