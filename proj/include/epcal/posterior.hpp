#pragma once

#include <Eigen/Dense>
#include <vector>

#include "epcal/gp.hpp"
#include "epcal/likelihood.hpp"

namespace epcal {

/// Hyperparameters for both calibrated fields (l=1: tau_out,
/// l=2: apd_max).
struct HyperState {
  FieldHyper field[2];

  int K() const { return static_cast<int>(field[0].eta.size()); }

  /// Unconstrained coordinates: (m, log alpha, log rho, eta) per field.
  Eigen::VectorXd pack() const {
    const int k = K();
    Eigen::VectorXd v(2 * (3 + k));
    for (int l = 0; l < 2; ++l) {
      const int base = l * (3 + k);
      v[base] = field[l].mean;
      v[base + 1] = std::log(field[l].amplitude);
      v[base + 2] = std::log(field[l].lengthscale);
      v.segment(base + 3, k) = field[l].eta;
    }
    return v;
  }

  static HyperState unpack(const Eigen::VectorXd& v, int k) {
    require(v.size() == 2 * (3 + k), "packed state has wrong size");
    HyperState s;
    for (int l = 0; l < 2; ++l) {
      const int base = l * (3 + k);
      s.field[l].mean = v[base];
      s.field[l].amplitude = std::exp(v[base + 1]);
      s.field[l].lengthscale = std::exp(v[base + 2]);
      s.field[l].eta = v.segment(base + 3, k);
    }
    return s;
  }
};

/// Prior hyper-prior settings (inverse gamma shapes/scales).
struct PriorSpec {
  double rho_shape = 1.01, rho_scale = 20.0;
  double alpha_shape = 1.0, alpha_scale = 5.0;
  // mean is improper flat
};

inline double inv_gamma_logpdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

/// Starting point for the sampler: a homogeneous (tau_out, apd_max)
/// grid-fitted through the surrogate to the observation-interval
/// midpoints, inside the validity region. Starting every chain near
/// data-consistent fields keeps warmup adaptation on the typical set.
inline HyperState initial_hyper_state(const SurrogateModel& surrogate,
                                      const std::vector<ERPObservation>& obs,
                                      int K) {
  double best = std::numeric_limits<double>::infinity();
  double best_t = 0.5 * (surrogate.tau_out_lo + surrogate.tau_out_hi);
  double best_a = 0.5 * (surrogate.apd_lo + surrogate.apd_hi);
  const int grid = 60;
  for (int i = 0; i <= grid; ++i) {
    const double t = surrogate.tau_out_lo +
                     (surrogate.tau_out_hi - surrogate.tau_out_lo) * i / grid;
    for (int j = 0; j <= grid; ++j) {
      const double a =
          surrogate.apd_lo + (surrogate.apd_hi - surrogate.apd_lo) * j / grid;
      const auto e = surrogate.evaluate(t, a);
      if (e.erp_s2 > surrogate.cutoff_ms) continue;
      double ss = 0;
      for (const auto& o : obs) {
        const double mid = 0.5 * (o.interval_lo_ms + o.interval_hi_ms);
        const double f =
            o.kind == ERPObservation::Kind::S2 ? e.erp_s2 : e.erp_s3;
        ss += (f - mid) * (f - mid);
      }
      if (ss < best) {
        best = ss;
        best_t = t;
        best_a = a;
      }
    }
  }
  HyperState init;
  for (int l = 0; l < 2; ++l) {
    init.field[l].mean = l == 0 ? best_t : best_a;
    init.field[l].amplitude = l == 0 ? 2.5 : 10.0;
    init.field[l].lengthscale = 10.0;
    init.field[l].eta = Eigen::VectorXd::Zero(K);
  }
  return init;
}

/// Log-posterior of the packed unconstrained state with analytic
/// gradient. The chain is: state -> (tau_out, apd_max) at observation
/// vertices -> surrogate ERP -> interval likelihood; plus priors
/// (eta ~ N(0,1), alpha and rho ~ InvGamma with log-Jacobians, m flat).
/// Surrogate validity violations use the clipped prediction plus a
/// smooth quadratic penalty so gradients keep flowing.
class ErpPosterior {
 public:
  ErpPosterior(const Eigenbasis& basis, const SurrogateModel& surrogate,
               std::vector<ERPObservation> observations, int K,
               KernelFamily kernel = KernelFamily::Rbf, PriorSpec priors = {},
               double pad_ms = 0.0)
      : basis_(basis),
        surrogate_(surrogate),
        obs_(std::move(observations)),
        K_(K),
        kernel_(kernel),
        priors_(priors),
        pad_ms_(pad_ms) {
    require(K_ >= 1 && K_ <= basis_.K(), "K exceeds basis size");
    for (const auto& o : obs_) {
      o.validate();
      require(o.vertex >= 0 && o.vertex < basis_.n_vertices(),
              "observation vertex out of bounds");
      if (std::find(vertices_.begin(), vertices_.end(), o.vertex) ==
          vertices_.end())
        vertices_.push_back(o.vertex);
    }
    for (const auto& o : obs_)
      obs_vertex_slot_.push_back(static_cast<int>(
          std::find(vertices_.begin(), vertices_.end(), o.vertex) -
          vertices_.begin()));
    phi_.resize(vertices_.size(), K_);
    for (size_t i = 0; i < vertices_.size(); ++i)
      phi_.row(i) = basis_.functions.row(vertices_[i]).head(K_);
    sqrt_lambda_ = basis_.eigenvalues.head(K_).array().sqrt();
  }

  int dim() const { return 2 * (3 + K_); }
  int n_observations() const { return static_cast<int>(obs_.size()); }
  /// Count of surrogate validity clips in the last evaluation.
  int last_clip_count() const { return clip_count_; }

  struct Result {
    double log_posterior;
    Eigen::VectorXd gradient;
  };

  Result operator()(const Eigen::VectorXd& packed) const {
    const HyperState state = HyperState::unpack(packed, K_);
    const int nv = static_cast<int>(vertices_.size());
    Result res;
    res.gradient = Eigen::VectorXd::Zero(dim());
    double logp = 0.0;
    clip_count_ = 0;

    // per-field spectral weights and fields at observation vertices
    Eigen::MatrixXd sqrt_s(K_, 2), dsqrt_s(K_, 2);
    Eigen::MatrixXd theta(nv, 2);
    for (int l = 0; l < 2; ++l) {
      const auto& h = state.field[l];
      for (int k = 0; k < K_; ++k) {
        sqrt_s(k, l) =
            sqrt_spectral_density(kernel_, sqrt_lambda_[k], h.lengthscale);
        dsqrt_s(k, l) = sqrt_spectral_density_drho(kernel_, sqrt_lambda_[k],
                                                   h.lengthscale);
      }
      theta.col(l) =
          Eigen::VectorXd::Constant(nv, h.mean) +
          h.amplitude * (phi_ * h.eta.cwiseProduct(sqrt_s.col(l)));
    }

    // likelihood terms: d logp / d theta_l(x_i), accumulated per vertex
    Eigen::MatrixXd dl_dtheta = Eigen::MatrixXd::Zero(nv, 2);
    for (size_t o = 0; o < obs_.size(); ++o) {
      const auto& ob = obs_[o];
      const int slot = obs_vertex_slot_[o];
      const auto ev = surrogate_.evaluate(theta(slot, 0), theta(slot, 1));
      double f;
      Eigen::Vector2d df;
      if (ob.kind == ERPObservation::Kind::S2) {
        f = ev.erp_s2;
        df = ev.grad_s2;
      } else {
        f = ev.erp_s3;
        df = ev.grad_s3;
      }
      double clipped = f;
      Eigen::Vector2d dclipped = df;
      if (ev.erp_s2 > surrogate_.cutoff_ms) {
        ++clip_count_;
        const double excess = ev.erp_s2 - surrogate_.cutoff_ms;
        logp -= 0.5 * excess * excess;
        dl_dtheta.row(slot) -= excess * ev.grad_s2.transpose();
        if (ob.kind == ERPObservation::Kind::S2) {
          clipped = surrogate_.cutoff_ms;
          dclipped.setZero();
        }
      }
      const auto ll = log_likelihood_interval(clipped, ob.interval_lo_ms,
                                              ob.interval_hi_ms, pad_ms_);
      logp += ll.value;
      dl_dtheta.row(slot) += ll.dvalue_df * dclipped.transpose();
    }

    // chain rule into the unconstrained coordinates
    for (int l = 0; l < 2; ++l) {
      const auto& h = state.field[l];
      const int base = l * (3 + K_);
      const Eigen::VectorXd g = dl_dtheta.col(l);  // nv
      res.gradient[base] += g.sum();  // d theta / d m = 1
      // d theta / d log alpha = theta - m
      res.gradient[base + 1] +=
          g.dot(theta.col(l) - Eigen::VectorXd::Constant(nv, h.mean));
      // d theta / d log rho = alpha rho * phi (eta .* dsqrtS)
      res.gradient[base + 2] +=
          h.amplitude * h.lengthscale *
          g.dot(phi_ * h.eta.cwiseProduct(dsqrt_s.col(l)));
      // d theta / d eta_k = alpha sqrtS_k phi_k
      res.gradient.segment(base + 3, K_) +=
          h.amplitude * sqrt_s.col(l).cwiseProduct(phi_.transpose() * g);
    }

    // priors
    for (int l = 0; l < 2; ++l) {
      const auto& h = state.field[l];
      const int base = l * (3 + K_);
      // eta ~ N(0,1)
      logp += -0.5 * h.eta.squaredNorm() -
              0.5 * K_ * std::log(2.0 * M_PI);
      res.gradient.segment(base + 3, K_) -= h.eta;
      // alpha ~ InvGamma, sampled in log-space (Jacobian: + log alpha)
      logp += inv_gamma_logpdf(h.amplitude, priors_.alpha_shape,
                               priors_.alpha_scale) +
              std::log(h.amplitude);
      res.gradient[base + 1] +=
          -(priors_.alpha_shape + 1.0) + priors_.alpha_scale / h.amplitude +
          1.0;
      // rho ~ InvGamma, log-space
      logp += inv_gamma_logpdf(h.lengthscale, priors_.rho_shape,
                               priors_.rho_scale) +
              std::log(h.lengthscale);
      res.gradient[base + 2] +=
          -(priors_.rho_shape + 1.0) + priors_.rho_scale / h.lengthscale + 1.0;
      // mean: flat prior, no contribution
    }

    require(std::isfinite(logp) && res.gradient.allFinite(),
            "non-finite log-posterior or gradient");
    res.log_posterior = logp;
    return res;
  }

  const std::vector<ERPObservation>& observations() const { return obs_; }
  const std::vector<int>& observation_vertices() const { return vertices_; }
  int K_modes() const { return K_; }
  KernelFamily kernel() const { return kernel_; }

 private:
  const Eigenbasis& basis_;
  const SurrogateModel& surrogate_;
  std::vector<ERPObservation> obs_;
  std::vector<int> vertices_;
  std::vector<int> obs_vertex_slot_;
  int K_;
  KernelFamily kernel_;
  PriorSpec priors_;
  double pad_ms_;
  Eigen::MatrixXd phi_;       // nv x K
  Eigen::VectorXd sqrt_lambda_;
  mutable int clip_count_ = 0;
};

}  // namespace epcal
