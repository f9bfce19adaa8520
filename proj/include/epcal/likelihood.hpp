#pragma once

#include <cmath>
#include <vector>

#include "epcal/common.hpp"

namespace epcal {

/// One interval-valued ERP observation at a mesh vertex.
struct ERPObservation {
  enum class Kind { S2, S3 };
  int vertex = 0;
  Kind kind = Kind::S2;
  double interval_lo_ms = 0;
  double interval_hi_ms = 0;
  double resolution_ms = 10.0;

  void validate() const {
    require(resolution_ms > 0, "resolution must be positive");
    require(interval_hi_ms > interval_lo_ms, "empty observation interval");
  }
};

/// Bracket a true ERP on the protocol grid: I is the largest grid point
/// <= true value (exact boundaries go to the upper interval).
inline std::pair<double, double> observe(double true_erp_ms, double res_ms,
                                         double grid_origin_ms = 0.0) {
  require(res_ms > 0, "resolution must be positive");
  const double shifted = (true_erp_ms - grid_origin_ms) / res_ms;
  const double lo = grid_origin_ms + std::floor(shifted + 1e-12) * res_ms;
  return {lo, lo + res_ms};
}

/// Approximate top-hat log-likelihood for a predicted ERP f given the
/// observation interval [I, I + dS]: an equal-weight mixture of N = dS
/// unit-SD normals centered on sub-interval midpoints, evaluated with
/// log-sum-exp. Optional `pad_ms` widens the interval on both sides
/// before sub-division (bias mitigation).
struct IntervalLogLik {
  double value;
  double dvalue_df;
};

inline IntervalLogLik log_likelihood_interval(double f, double interval_lo,
                                              double interval_hi,
                                              double pad_ms = 0.0) {
  const double lo = interval_lo - pad_ms;
  const double hi = interval_hi + pad_ms;
  const double width = hi - lo;
  require(width > 0, "empty interval");
  const int n = std::max(1, static_cast<int>(std::lround(width)));
  const double s = width / n;  // sub-interval width == component SD

  // log( 1/n sum_i N(f; c_i, s) ) via log-sum-exp
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(n);
  for (int i = 0; i < n; ++i) {
    const double c = lo + (i + 0.5) * s;
    const double z = (f - c) / s;
    terms[i] = -0.5 * z * z;
    max_term = std::max(max_term, terms[i]);
  }
  double sum = 0, dsum = 0;
  for (int i = 0; i < n; ++i) {
    const double c = lo + (i + 0.5) * s;
    const double e = std::exp(terms[i] - max_term);
    sum += e;
    dsum += e * (-(f - c) / (s * s));
  }
  IntervalLogLik out;
  out.value = max_term + std::log(sum) - std::log(static_cast<double>(n)) -
              0.5 * std::log(2.0 * M_PI) - std::log(s);
  out.dvalue_df = dsum / sum;
  return out;
}

}  // namespace epcal
