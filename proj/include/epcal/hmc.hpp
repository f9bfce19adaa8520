#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "epcal/common.hpp"

namespace epcal {

/// Target for HMC: value and gradient of an unnormalized log-density.
using LogDensityTarget =
    std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;

struct HmcConfig {
  int iterations = 5000;       // per chain, including warmup
  int chains = 8;
  double warmup_fraction = 0.5;
  int thin_to = 200;           // pooled post-warmup draws kept (0 = keep all)
  double target_accept = 0.8;
  double initial_step = 0.1;
  double path_length = 1.0;    // nominal integration time per transition
  int max_leapfrog = 128;
  std::uint64_t seed = 1;
};

struct PosteriorSamples {
  std::vector<Eigen::VectorXd> draws;     // pooled, thinned
  std::vector<double> log_densities;      // matching draws
  Eigen::VectorXd rhat;                   // split R-hat per coordinate
  double mean_accept = 0;
  int divergences = 0;
  int chains = 0;
  int kept_per_chain = 0;
};

namespace detail {

/// Split R-hat (Gelman et al.): each chain halved, variance ratio across
/// the 2*chains half-chains.
inline Eigen::VectorXd split_rhat(
    const std::vector<std::vector<Eigen::VectorXd>>& chains) {
  const int n_half = static_cast<int>(chains[0].size()) / 2;
  const int dim = static_cast<int>(chains[0][0].size());
  std::vector<std::pair<int, int>> halves;  // (chain, half)
  for (size_t c = 0; c < chains.size(); ++c) {
    halves.emplace_back(static_cast<int>(c), 0);
    halves.emplace_back(static_cast<int>(c), 1);
  }
  const int m = static_cast<int>(halves.size());
  Eigen::VectorXd rhat(dim);
  for (int d = 0; d < dim; ++d) {
    Eigen::VectorXd means(m), vars(m);
    for (int h = 0; h < m; ++h) {
      const auto& [c, half] = halves[h];
      double mu = 0;
      for (int i = 0; i < n_half; ++i)
        mu += chains[c][half * n_half + i][d];
      mu /= n_half;
      double v = 0;
      for (int i = 0; i < n_half; ++i) {
        const double x = chains[c][half * n_half + i][d] - mu;
        v += x * x;
      }
      means[h] = mu;
      vars[h] = v / (n_half - 1);
    }
    const double w = vars.mean();
    const double grand = means.mean();
    const double b =
        n_half * (means.array() - grand).square().sum() / (m - 1);
    rhat[d] = std::sqrt((w * (n_half - 1) / n_half + b / n_half) /
                        std::max(w, 1e-300));
  }
  return rhat;
}

}  // namespace detail

/// Hamiltonian Monte Carlo with dual-averaging step-size adaptation
/// during warmup and a diagonal mass matrix estimated from the second
/// half of warmup. Post-warmup draws are pooled across chains and
/// randomly thinned to `thin_to`.
inline PosteriorSamples run_hmc(const LogDensityTarget& target,
                                const Eigen::VectorXd& init,
                                const HmcConfig& cfg) {
  require(cfg.iterations >= 10 && cfg.chains >= 1, "invalid HMC config");
  const int dim = static_cast<int>(init.size());
  const int warmup = static_cast<int>(cfg.iterations * cfg.warmup_fraction);
  const int kept = cfg.iterations - warmup;
  Rng master(cfg.seed);

  std::vector<std::vector<Eigen::VectorXd>> chain_draws(cfg.chains);
  std::vector<std::vector<double>> chain_logp(cfg.chains);
  double accept_sum = 0;
  long accept_count = 0;
  int divergences = 0;

  for (int c = 0; c < cfg.chains; ++c) {
    Rng rng = master.split(c);
    Eigen::VectorXd q = init;
    for (int d = 0; d < dim; ++d) q[d] += 0.1 * rng.normal();  // jitter
    auto [logp, grad] = target(q);
    require(std::isfinite(logp), "non-finite target at initialization");

    Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(dim);
    Eigen::VectorXd sqrt_mass = Eigen::VectorXd::Ones(dim);

    // dual averaging state (Hoffman & Gelman 2014, Algorithm 5 constants)
    double step = cfg.initial_step;
    double log_step = std::log(step);
    double log_step_avg = log_step;
    double h_bar = 0;
    const double mu = std::log(10.0 * step);
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    int adapt_iter = 0;

    // running moments for mass estimation (second half of warmup)
    Eigen::VectorXd mom_mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd mom_m2 = Eigen::VectorXd::Zero(dim);
    long mom_n = 0;

    chain_draws[c].reserve(kept);
    for (int it = 0; it < cfg.iterations; ++it) {
      // momentum refresh (mass = diag(1/inv_mass))
      Eigen::VectorXd p(dim);
      for (int d = 0; d < dim; ++d) p[d] = rng.normal() * sqrt_mass[d];

      const double h0 = -logp + 0.5 * p.dot(inv_mass.cwiseProduct(p));
      Eigen::VectorXd q_new = q, grad_new = grad, p_new = p;
      double logp_new = logp;

      int n_steps = std::max(
          1, std::min(cfg.max_leapfrog,
                      static_cast<int>(std::lround(cfg.path_length / step))));
      // jitter trajectory length to avoid resonances
      n_steps = 1 + static_cast<int>(rng.uniform_int(n_steps));

      bool diverged = false;
      for (int s = 0; s < n_steps; ++s) {
        p_new += 0.5 * step * grad_new;
        q_new += step * inv_mass.cwiseProduct(p_new);
        double lp;
        Eigen::VectorXd g;
        try {
          std::tie(lp, g) = target(q_new);
        } catch (const Error&) {
          diverged = true;
          break;
        }
        if (!std::isfinite(lp)) {
          diverged = true;
          break;
        }
        logp_new = lp;
        grad_new = g;
        p_new += 0.5 * step * grad_new;
      }

      double accept_prob = 0.0;
      if (!diverged) {
        const double h1 =
            -logp_new + 0.5 * p_new.dot(inv_mass.cwiseProduct(p_new));
        const double dh = h0 - h1;
        if (dh < -1000.0) {
          diverged = true;
        } else {
          accept_prob = std::min(1.0, std::exp(std::min(0.0, dh)));
        }
      }
      if (diverged && it >= warmup) ++divergences;

      if (!diverged && rng.uniform() < accept_prob) {
        q = q_new;
        logp = logp_new;
        grad = grad_new;
      }
      accept_sum += accept_prob;
      ++accept_count;

      if (it < warmup) {
        // dual averaging
        ++adapt_iter;
        const double eta = 1.0 / (adapt_iter + t0);
        h_bar = (1.0 - eta) * h_bar + eta * (cfg.target_accept - accept_prob);
        log_step = mu - std::sqrt(static_cast<double>(adapt_iter)) / gamma * h_bar;
        const double w = std::pow(adapt_iter, -kappa);
        log_step_avg = w * log_step + (1.0 - w) * log_step_avg;
        step = std::exp(log_step);

        // collect moments over the middle of warmup, apply mass at 75%
        if (it >= warmup / 4 && it < 3 * warmup / 4) {
          ++mom_n;
          const Eigen::VectorXd delta = q - mom_mean;
          mom_mean += delta / mom_n;
          mom_m2 += delta.cwiseProduct(q - mom_mean);
        }
        if (it == 3 * warmup / 4 && mom_n > 10) {
          Eigen::VectorXd var = mom_m2 / (mom_n - 1);
          for (int d = 0; d < dim; ++d)
            inv_mass[d] = std::max(var[d], 1e-8);
          sqrt_mass = inv_mass.cwiseInverse().cwiseSqrt();
          // restart step-size adaptation for the new metric
          adapt_iter = 0;
          h_bar = 0;
          log_step_avg = log_step;
        }
        if (it == warmup - 1) step = std::exp(log_step_avg);
      } else {
        chain_draws[c].push_back(q);
        chain_logp[c].push_back(logp);
      }
    }
  }

  PosteriorSamples out;
  out.chains = cfg.chains;
  out.kept_per_chain = kept;
  out.mean_accept = accept_sum / accept_count;
  out.divergences = divergences;
  out.rhat = detail::split_rhat(chain_draws);

  // pool and randomly thin
  std::vector<std::pair<int, int>> all;
  for (int c = 0; c < cfg.chains; ++c)
    for (int i = 0; i < kept; ++i) all.emplace_back(c, i);
  Rng rng = master.split(10007);
  if (cfg.thin_to > 0 && cfg.thin_to < static_cast<int>(all.size())) {
    // partial Fisher-Yates: first thin_to entries are a uniform subset
    for (int i = 0; i < cfg.thin_to; ++i) {
      const auto j = i + rng.uniform_int(all.size() - i);
      std::swap(all[i], all[j]);
    }
    all.resize(cfg.thin_to);
    std::sort(all.begin(), all.end());
  }
  out.draws.reserve(all.size());
  for (const auto& [c, i] : all) {
    out.draws.push_back(chain_draws[c][i]);
    out.log_densities.push_back(chain_logp[c][i]);
  }
  return out;
}

}  // namespace epcal
