#pragma once

#include <limits>

#include <Eigen/Dense>

#include "epcal/distance.hpp"
#include "epcal/fields.hpp"
#include "epcal/surrogate.hpp"

namespace epcal {

/// Stationary covariance kernel on the 2D manifold.
enum class KernelFamily { Rbf, Matern52 };

/// Spectral density S(omega, rho) for intrinsic dimension d = 2,
/// normalized to unit marginal variance: integrating
/// S(|w|) d^2 w / (2 pi)^2 over the plane gives 1, so a reduced-rank
/// expansion in M-orthonormal eigenfunctions has unit prior variance.
inline double spectral_density(KernelFamily kernel, double omega, double rho) {
  require(rho > 0 && omega >= 0, "need rho > 0 and omega >= 0");
  switch (kernel) {
    case KernelFamily::Rbf:
      return 2.0 * M_PI * rho * rho * std::exp(-0.5 * rho * rho * omega * omega);
    case KernelFamily::Matern52: {
      // S(w) = 10 pi 5^{5/2} rho^{-5} (5/rho^2 + w^2)^{-7/2}
      const double base = 5.0 / (rho * rho) + omega * omega;
      return 10.0 * M_PI * std::pow(5.0, 2.5) / std::pow(rho, 5) *
             std::pow(base, -3.5);
    }
  }
  throw Error("unknown kernel");
}

inline double sqrt_spectral_density(KernelFamily kernel, double omega,
                                    double rho) {
  return std::sqrt(spectral_density(kernel, omega, rho));
}

/// d sqrt(S)/d rho; used for HMC gradients.
inline double sqrt_spectral_density_drho(KernelFamily kernel, double omega,
                                         double rho) {
  const double sq = sqrt_spectral_density(kernel, omega, rho);
  switch (kernel) {
    case KernelFamily::Rbf:
      // sqrt(S) = sqrt(2 pi) rho exp(-rho^2 w^2 / 4)
      return sq * (1.0 / rho - 0.5 * rho * omega * omega);
    case KernelFamily::Matern52: {
      const double base = 5.0 / (rho * rho) + omega * omega;
      const double dlnS = -5.0 / rho + 35.0 / (rho * rho * rho * base);
      return 0.5 * sq * dlnS;
    }
  }
  throw Error("unknown kernel");
}

/// Hyperparameters of one GP field.
struct FieldHyper {
  double mean = 0.0;
  double amplitude = 1.0;   // marginal SD in field units
  double lengthscale = 1.0; // mesh spatial units (mm for mm meshes)
  Eigen::VectorXd eta;      // K latent weights

  void validate() const {
    require(amplitude > 0 && lengthscale > 0,
            "amplitude and lengthscale must be positive");
  }
};

/// theta(x) = m + alpha sum_k eta_k sqrt(S(sqrt(lambda_k), rho)) phi_k(x)
/// over the first K = |eta| modes. With M-orthonormal eigenfunctions and
/// the spectral normalization above, alpha is the prior marginal SD.
inline Eigen::VectorXd field_evaluate(const Eigenbasis& basis,
                                      KernelFamily kernel,
                                      const FieldHyper& hyper) {
  hyper.validate();
  const int k = static_cast<int>(hyper.eta.size());
  require(k >= 1 && k <= basis.K(), "eta length exceeds basis size");
  Eigen::VectorXd weights(k);
  for (int i = 0; i < k; ++i)
    weights[i] = hyper.eta[i] *
                 sqrt_spectral_density(kernel, std::sqrt(basis.eigenvalues[i]),
                                       hyper.lengthscale);
  return Eigen::VectorXd::Constant(basis.n_vertices(), hyper.mean) +
         hyper.amplitude * (basis.functions.leftCols(k) * weights);
}

/// Same field restricted to a vertex subset (cheap path for likelihoods).
inline Eigen::VectorXd field_evaluate_at(const Eigenbasis& basis,
                                         KernelFamily kernel,
                                         const FieldHyper& hyper,
                                         const std::vector<int>& vertices) {
  hyper.validate();
  const int k = static_cast<int>(hyper.eta.size());
  require(k >= 1 && k <= basis.K(), "eta length exceeds basis size");
  Eigen::VectorXd out(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i) {
    double acc = 0;
    for (int j = 0; j < k; ++j)
      acc += hyper.eta[j] *
             sqrt_spectral_density(kernel, std::sqrt(basis.eigenvalues[j]),
                                   hyper.lengthscale) *
             basis.functions(vertices[i], j);
    out[i] = hyper.mean + hyper.amplitude * acc;
  }
  return out;
}

/// Basis with the constant (lambda ~ 0) eigenfunction removed. The
/// calibration model carries an explicit mean per field, so keeping the
/// constant mode in the eta expansion makes the posterior exactly
/// degenerate along (mean, eta_0); both the sampler target and the
/// field reconstruction from draws must use the same reduced basis.
inline Eigenbasis drop_constant_mode(const Eigenbasis& basis,
                                     double tol = 1e-10) {
  if (basis.K() < 2 || basis.eigenvalues[0] > tol) return basis;
  Eigenbasis out;
  out.eigenvalues = basis.eigenvalues.tail(basis.K() - 1).eval();
  out.functions = basis.functions.rightCols(basis.K() - 1).eval();
  out.mass = basis.mass;
  return out;
}

/// Draw one zero-mean, unit-amplitude prior field (eta ~ N(0,1) iid).
inline Eigen::VectorXd sample_prior_field(const Eigenbasis& basis,
                                          KernelFamily kernel, double rho,
                                          int K, Rng& rng) {
  require(K >= 1 && K <= basis.K(), "K exceeds basis size");
  FieldHyper h;
  h.lengthscale = rho;
  h.eta.resize(K);
  for (int i = 0; i < K; ++i) h.eta[i] = rng.normal();
  return field_evaluate(basis, kernel, h);
}

/// Affine map of a sample so its min/max hit [lo, hi] exactly.
inline Eigen::VectorXd rescale_to_range(const Eigen::VectorXd& v, double lo,
                                        double hi) {
  const double mn = v.minCoeff(), mx = v.maxCoeff();
  require(mx > mn, "cannot rescale a constant field");
  return lo + (hi - lo) * (v.array() - mn) / (mx - mn);
}

/// Replace parameter values at vertices whose surrogate ERP_S2 exceeds
/// the cutoff by the 1/d_BH^4-weighted average over admissible vertices.
/// Admissible vertices are never modified. Re-checks and repeats up to
/// `max_passes` in case the replacement itself lands above the cutoff.
/// A large offending patch can stall the averaging (its rim values
/// average back above the cutoff), so any remaining offender is finally
/// moved along the segment toward its nearest admissible vertex until
/// the constraint holds; the segment endpoint is feasible, so this
/// always terminates.
inline EPFields repair_constraints(const EPFields& fields,
                                   const Eigenbasis& basis,
                                   const SurrogateModel& surrogate,
                                   int max_passes = 3, int embed_modes = 0) {
  EPFields out = fields;
  const int n = out.n_vertices();
  require(n == basis.n_vertices(), "fields/basis size mismatch");
  Matrix emb = biharmonic_embedding(basis);
  // distance weights decay like 1/lambda^2, so a truncated embedding is
  // accurate and much cheaper when the basis is large
  if (embed_modes > 0 && embed_modes < emb.cols())
    emb = emb.leftCols(embed_modes).eval();
  const Eigen::VectorXd emb_sq = emb.rowwise().squaredNorm();

  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<int> offenders, admissible;
    for (int v = 0; v < n; ++v) {
      const auto e = surrogate.evaluate(out.tau_out[v], out.apd_max[v]);
      (e.erp_s2 > surrogate.cutoff_ms ? offenders : admissible).push_back(v);
    }
    if (offenders.empty()) return out;
    require(!admissible.empty(), "no admissible vertices to average from");

    const int no = static_cast<int>(offenders.size());
    const int na = static_cast<int>(admissible.size());
    Matrix emb_off(no, emb.cols()), emb_adm(na, emb.cols());
    Eigen::VectorXd adm_tau(na), adm_apd(na), sq_off(no), sq_adm(na);
    for (int i = 0; i < no; ++i) {
      emb_off.row(i) = emb.row(offenders[i]);
      sq_off[i] = emb_sq[offenders[i]];
    }
    for (int a = 0; a < na; ++a) {
      emb_adm.row(a) = emb.row(admissible[a]);
      sq_adm[a] = emb_sq[admissible[a]];
      adm_tau[a] = out.tau_out[admissible[a]];
      adm_apd[a] = out.apd_max[admissible[a]];
    }
    // d^2(i,a) via the Gram expansion, then weights 1/d^4
    Matrix d2 = (-2.0 * (emb_off * emb_adm.transpose())).eval();
    d2.colwise() += sq_off;
    d2.rowwise() += sq_adm.transpose();
    Matrix w = (d2.array() * d2.array()).cwiseMax(1e-300).inverse();
    const Eigen::VectorXd wsum = w.rowwise().sum();
    const Eigen::VectorXd new_tau = (w * adm_tau).cwiseQuotient(wsum);
    const Eigen::VectorXd new_apd = (w * adm_apd).cwiseQuotient(wsum);
    for (int i = 0; i < no; ++i) {
      out.tau_out[offenders[i]] = new_tau[i];
      out.apd_max[offenders[i]] = new_apd[i];
    }
  }
  // projection fallback for offenders the averaging could not resolve
  {
    std::vector<int> offenders, admissible;
    for (int v = 0; v < n; ++v) {
      const auto e = surrogate.evaluate(out.tau_out[v], out.apd_max[v]);
      (e.erp_s2 > surrogate.cutoff_ms ? offenders : admissible).push_back(v);
    }
    require(offenders.empty() || !admissible.empty(),
            "no admissible vertices to project onto");
    for (int v : offenders) {
      int nearest = admissible[0];
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int a : admissible) {
        const double d2 =
            emb_sq[v] + emb_sq[a] - 2.0 * emb.row(v).dot(emb.row(a));
        if (d2 < best_d2) {
          best_d2 = d2;
          nearest = a;
        }
      }
      const double t0 = out.tau_out[v], a0 = out.apd_max[v];
      const double t1 = out.tau_out[nearest], a1 = out.apd_max[nearest];
      double lo = 0.0, hi = 1.0;  // lo infeasible, hi feasible
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto e = surrogate.evaluate(t0 + mid * (t1 - t0),
                                          a0 + mid * (a1 - a0));
        (e.erp_s2 > surrogate.cutoff_ms ? lo : hi) = mid;
      }
      out.tau_out[v] = t0 + hi * (t1 - t0);
      out.apd_max[v] = a0 + hi * (a1 - a0);
    }
  }
  // final verification
  for (int v = 0; v < n; ++v) {
    const auto e = surrogate.evaluate(out.tau_out[v], out.apd_max[v]);
    require(e.erp_s2 <= surrogate.cutoff_ms,
            "constraint repair did not converge");
  }
  return out;
}

/// Synthetic ground-truth fields: independent Matern-5/2 prior samples
/// for tau_out, apd_max and cv_max, each rescaled to its full valid
/// range; tau_in and tau_open held constant; then constraint repair.
inline EPFields generate_ground_truth(const Eigenbasis& basis, double rho,
                                      const SurrogateModel& surrogate,
                                      std::uint64_t seed, int K = 256) {
  require(basis.K() >= K, "basis has fewer than K eigenpairs");
  Rng rng(seed);
  const int n = basis.n_vertices();
  EPFields f;
  f.tau_out = rescale_to_range(
      sample_prior_field(basis, KernelFamily::Matern52, rho, K, rng),
      EPParams::kTauOutMin, EPParams::kTauOutMax);
  f.apd_max = rescale_to_range(
      sample_prior_field(basis, KernelFamily::Matern52, rho, K, rng),
      EPParams::kApdMin, EPParams::kApdMax);
  f.cv_max = rescale_to_range(
      sample_prior_field(basis, KernelFamily::Matern52, rho, K, rng),
      EPParams::kCvMin, EPParams::kCvMax);
  f.tau_in = Eigen::VectorXd::Constant(n, 0.05);
  f.tau_open = Eigen::VectorXd::Constant(n, 120.0);
  return repair_constraints(f, basis, surrogate);
}

}  // namespace epcal
