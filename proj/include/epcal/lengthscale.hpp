#pragma once

#include <vector>

#include "epcal/gp.hpp"

namespace epcal {

/// Kernel correlation as a function of metric distance d with
/// lengthscale ell.
inline double kernel_correlation(KernelFamily kernel, double d, double ell) {
  switch (kernel) {
    case KernelFamily::Rbf:
      return std::exp(-0.5 * d * d / (ell * ell));
    case KernelFamily::Matern52: {
      const double u = std::sqrt(5.0) * d / ell;
      return (1.0 + u + u * u / 3.0) * std::exp(-u);
    }
  }
  throw Error("unknown kernel");
}

/// Empirical conversion between the spectral lengthscale parameter rho
/// and metric (geodesic) distance: draw prior fields, estimate
/// correlation at sampled vertex pairs, least-squares fit the kernel's
/// correlation-vs-distance curve, and return fitted-lengthscale / rho
/// (mm per lengthscale unit).
inline double calibrate_lengthscale_units(const TriMesh& mesh,
                                          const Eigenbasis& basis,
                                          KernelFamily kernel, double rho,
                                          int n_samples, int n_pairs,
                                          std::uint64_t seed) {
  require(n_samples >= 50, "need at least 50 prior samples");
  require(n_pairs >= 20, "need at least 20 vertex pairs");
  const int n = basis.n_vertices();
  Rng rng(seed);

  Matrix samples(n, n_samples);
  for (int s = 0; s < n_samples; ++s)
    samples.col(s) = sample_prior_field(basis, kernel, rho, basis.K(), rng);

  // pairs grouped by a few geodesic source vertices
  const int n_sources = std::min(24, n_pairs);
  const int per_source = (n_pairs + n_sources - 1) / n_sources;
  std::vector<double> dist_obs, corr_obs;
  for (int s = 0; s < n_sources; ++s) {
    const int src = static_cast<int>(rng.uniform_int(n));
    const auto geo = graph_geodesic(mesh, {src});
    const Eigen::VectorXd fs = samples.row(src);
    const double var_s = fs.squaredNorm();
    for (int p = 0; p < per_source; ++p) {
      const int tgt = static_cast<int>(rng.uniform_int(n));
      if (tgt == src || !std::isfinite(geo[tgt])) continue;
      const Eigen::VectorXd ft = samples.row(tgt);
      const double c = fs.dot(ft) / std::sqrt(var_s * ft.squaredNorm());
      dist_obs.push_back(geo[tgt]);
      corr_obs.push_back(c);
    }
  }
  require(dist_obs.size() >= 20, "too few usable vertex pairs");
  const double min_corr =
      *std::min_element(corr_obs.begin(), corr_obs.end());
  require(min_corr < 0.5,
          "correlations never decay: rho too large for this mesh");

  // golden-section search on the least-squares objective in log(ell)
  auto sse = [&](double ell) {
    double acc = 0;
    for (size_t i = 0; i < dist_obs.size(); ++i) {
      const double r = corr_obs[i] - kernel_correlation(kernel, dist_obs[i], ell);
      acc += r * r;
    }
    return acc;
  };
  const double d_max = *std::max_element(dist_obs.begin(), dist_obs.end());
  double lo = std::log(1e-3 * d_max), hi = std::log(10.0 * d_max);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
  double fa = sse(std::exp(a)), fb = sse(std::exp(b));
  for (int it = 0; it < 80; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - gr * (hi - lo);
      fa = sse(std::exp(a));
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + gr * (hi - lo);
      fb = sse(std::exp(b));
    }
  }
  const double ell = std::exp(0.5 * (lo + hi));
  require(ell < 5.0 * d_max, "lengthscale fit did not converge");
  return ell / rho;
}

}  // namespace epcal
