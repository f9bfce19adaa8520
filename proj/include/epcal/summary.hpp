#pragma once

#include <vector>

#include "epcal/design.hpp"
#include "epcal/hmc.hpp"
#include "epcal/posterior.hpp"

namespace epcal {

/// Per-vertex posterior summaries of the calibrated fields and the ERP
/// fields derived from them.
struct FieldSummaries {
  Eigen::VectorXd tau_out_mean, tau_out_sd;
  Eigen::VectorXd apd_max_mean, apd_max_sd;
  Eigen::VectorXd erp_s2_mean, erp_s2_sd;
  Eigen::VectorXd erp_s3_mean, erp_s3_sd;
  // fields of the maximum-a-posteriori draw
  Eigen::VectorXd map_tau_out, map_apd_max, map_erp_s2, map_erp_s3;
  int map_index = -1;
};

/// Evaluate tau_out/apd_max fields for one packed draw, apply constraint
/// repair, and derive ERP fields through the surrogate.
inline void draw_to_fields(const Eigen::VectorXd& packed, int K,
                           const Eigenbasis& basis, KernelFamily kernel,
                           const SurrogateModel& surrogate, bool repair,
                           Eigen::VectorXd* tau_out, Eigen::VectorXd* apd_max,
                           Eigen::VectorXd* erp_s2, Eigen::VectorXd* erp_s3) {
  const HyperState state = HyperState::unpack(packed, K);
  const int n = basis.n_vertices();
  EPFields f;
  f.tau_out = field_evaluate(basis, kernel, state.field[0]);
  f.apd_max = field_evaluate(basis, kernel, state.field[1]);
  f.cv_max = Eigen::VectorXd::Constant(n, 0.7);
  f.tau_in = Eigen::VectorXd::Constant(n, 0.05);
  f.tau_open = Eigen::VectorXd::Constant(n, 120.0);
  if (repair) f = repair_constraints(f, basis, surrogate, 3, 64);
  *tau_out = f.tau_out;
  *apd_max = f.apd_max;
  erp_s2->resize(n);
  erp_s3->resize(n);
  for (int v = 0; v < n; ++v) {
    const auto e = surrogate.evaluate(f.tau_out[v], f.apd_max[v]);
    (*erp_s2)[v] = e.erp_s2;
    (*erp_s3)[v] = e.erp_s3;
  }
}

/// Mean/SD over posterior draws of the parameter and ERP fields, plus
/// the maximum-a-posteriori draw's fields.
inline FieldSummaries posterior_fields(const PosteriorSamples& samples,
                                       int K, const Eigenbasis& basis,
                                       const SurrogateModel& surrogate,
                                       KernelFamily kernel = KernelFamily::Rbf,
                                       bool repair = true) {
  require(!samples.draws.empty(), "no posterior draws");
  const int n = basis.n_vertices();
  FieldSummaries s;
  Eigen::VectorXd acc[8];
  for (auto& a : acc) a = Eigen::VectorXd::Zero(n);
  // acc: mean/m2 pairs for tau_out, apd, erp_s2, erp_s3 (Welford)

  int map_idx = 0;
  for (size_t i = 1; i < samples.draws.size(); ++i)
    if (samples.log_densities[i] > samples.log_densities[map_idx])
      map_idx = static_cast<int>(i);
  s.map_index = map_idx;

  long count = 0;
  for (size_t i = 0; i < samples.draws.size(); ++i) {
    Eigen::VectorXd tau, apd, e2, e3;
    draw_to_fields(samples.draws[i], K, basis, kernel, surrogate, repair,
                   &tau, &apd, &e2, &e3);
    if (static_cast<int>(i) == map_idx) {
      s.map_tau_out = tau;
      s.map_apd_max = apd;
      s.map_erp_s2 = e2;
      s.map_erp_s3 = e3;
    }
    ++count;
    const Eigen::VectorXd* vals[4] = {&tau, &apd, &e2, &e3};
    for (int f = 0; f < 4; ++f) {
      const Eigen::VectorXd delta = *vals[f] - acc[2 * f];
      acc[2 * f] += delta / count;
      acc[2 * f + 1] += delta.cwiseProduct(*vals[f] - acc[2 * f]);
    }
  }
  auto sd_of = [&](int f) {
    if (count < 2) return Eigen::VectorXd::Zero(n).eval();
    return (acc[2 * f + 1] / (count - 1)).cwiseSqrt().eval();
  };
  s.tau_out_mean = acc[0];
  s.tau_out_sd = sd_of(0);
  s.apd_max_mean = acc[2];
  s.apd_max_sd = sd_of(1);
  s.erp_s2_mean = acc[4];
  s.erp_s2_sd = sd_of(2);
  s.erp_s3_mean = acc[6];
  s.erp_s3_sd = sd_of(3);
  return s;
}

/// Independent standard error |true - mean| / sd per vertex. Vertices
/// with sd below `sd_floor` are flagged (score computed with the floor).
struct IseResult {
  Eigen::VectorXd scores;
  std::vector<char> sd_flagged;
};

inline IseResult ise(const Eigen::VectorXd& truth,
                     const Eigen::VectorXd& mean, const Eigen::VectorXd& sd,
                     double sd_floor = 1e-9) {
  require(truth.size() == mean.size() && mean.size() == sd.size(),
          "field size mismatch");
  IseResult out;
  out.scores.resize(truth.size());
  out.sd_flagged.assign(truth.size(), 0);
  for (int v = 0; v < truth.size(); ++v) {
    if (sd[v] < sd_floor) out.sd_flagged[v] = 1;
    out.scores[v] = std::abs(truth[v] - mean[v]) / std::max(sd[v], sd_floor);
  }
  return out;
}

/// Clamp fields into the valid EPParams box (needed before running the
/// tissue simulator on raw posterior fields).
inline EPFields clamp_to_valid(const EPFields& f) {
  EPFields out = f;
  auto clamp = [](Eigen::VectorXd& v, double lo, double hi) {
    v = v.cwiseMax(lo).cwiseMin(hi);
  };
  clamp(out.cv_max, EPParams::kCvMin, EPParams::kCvMax);
  clamp(out.tau_in, EPParams::kTauInMin, EPParams::kTauInMax);
  clamp(out.tau_out, EPParams::kTauOutMin, EPParams::kTauOutMax);
  clamp(out.tau_open, EPParams::kTauOpenMin, EPParams::kTauOpenMax);
  clamp(out.apd_max, EPParams::kApdMin, EPParams::kApdMax);
  return out;
}

/// One cell of the validation sweep.
struct ValidationRow {
  double lengthscale;
  int n_observations;
  double resolution_ms;
  int replicate;
  int design;
  double rmse_s2;  // all-vertex RMSE of MAP-predicted ERP_S2 vs truth
  double rmse_s3;
  std::string error;  // nonempty if the cell failed
};

struct ValidationConfig {
  std::vector<double> lengthscales = {10.0, 20.0, 40.0};
  std::vector<int> n_observations = {5, 10, 20};
  std::vector<double> resolutions_ms = {5.0, 10.0};
  int replicates = 5;
  int designs_per_replicate = 1;
  int K = 32;
  double exclusion_cm = 0.6;
  HmcConfig hmc;
  std::uint64_t seed = 1;
  double grid_origin_ms = 0.0;
};

/// Full quantitative-validation sweep: per cell, generate a ground truth
/// at the given lengthscale, draw an observation design, synthesize
/// interval observations at the given protocol resolution, calibrate,
/// and score the MAP ERP prediction against the truth over all vertices.
/// Per-cell failures are recorded and the sweep continues.
inline std::vector<ValidationRow> validate(const TriMesh& mesh,
                                           const Eigenbasis& basis,
                                           const SurrogateModel& surrogate,
                                           const ValidationConfig& cfg) {
  std::vector<ValidationRow> rows;
  // Calibrate against the basis without its constant eigenfunction: the
  // per-field mean already spans it, and keeping both makes the posterior
  // degenerate along that direction. Truth generation keeps the full basis.
  const Eigenbasis cal_basis = drop_constant_mode(basis);
  int cell_index = 0;
  for (double ls : cfg.lengthscales) {
    for (int rep = 0; rep < cfg.replicates; ++rep) {
      const std::uint64_t truth_seed =
          cfg.seed + 1000003ULL * static_cast<std::uint64_t>(
                                      std::llround(ls * 1000)) +
          rep;
      EPFields truth;
      Eigen::VectorXd truth_e2, truth_e3;
      try {
        truth = generate_ground_truth(basis, ls, surrogate, truth_seed);
        truth_e2.resize(basis.n_vertices());
        truth_e3.resize(basis.n_vertices());
        for (int v = 0; v < basis.n_vertices(); ++v) {
          const auto e = surrogate.evaluate(truth.tau_out[v], truth.apd_max[v]);
          truth_e2[v] = e.erp_s2;
          truth_e3[v] = e.erp_s3;
        }
      } catch (const Error& e) {
        for (int n_obs : cfg.n_observations)
          for (double res : cfg.resolutions_ms)
            for (int d = 0; d < cfg.designs_per_replicate; ++d)
              rows.push_back({ls, n_obs, res, rep, d, 0, 0, e.what()});
        continue;
      }
      for (int n_obs : cfg.n_observations) {
        for (int d = 0; d < cfg.designs_per_replicate; ++d) {
          DesignSites sites;
          try {
            sites = maximin_design(mesh, basis, n_obs, cfg.exclusion_cm,
                                   cfg.seed + 7919 * d + (d > 0 ? rep : 0));
          } catch (const Error& e) {
            for (double res : cfg.resolutions_ms)
              rows.push_back({ls, n_obs, res, rep, d, 0, 0, e.what()});
            continue;
          }
          for (double res : cfg.resolutions_ms) {
            ++cell_index;
            ValidationRow row{ls, n_obs, res, rep, d, 0, 0, ""};
            try {
              std::vector<ERPObservation> obs;
              for (int site : sites.vertices) {
                const auto [lo2, hi2] =
                    observe(truth_e2[site], res, cfg.grid_origin_ms);
                obs.push_back(
                    {site, ERPObservation::Kind::S2, lo2, hi2, res});
                const auto [lo3, hi3] =
                    observe(truth_e3[site], res, cfg.grid_origin_ms);
                obs.push_back(
                    {site, ERPObservation::Kind::S3, lo3, hi3, res});
              }
              ErpPosterior post(cal_basis, surrogate, obs, cfg.K);
              const HyperState init =
                  initial_hyper_state(surrogate, obs, cfg.K);
              HmcConfig hmc = cfg.hmc;
              hmc.seed = cfg.seed + 31ULL * cell_index;
              hmc.target_accept = 0.9;
              hmc.path_length = 1.5;
              const auto samples = run_hmc(
                  [&](const Eigen::VectorXd& q) {
                    const auto r = post(q);
                    return std::make_pair(r.log_posterior, r.gradient);
                  },
                  init.pack(), hmc);
              int map_idx = 0;
              for (size_t i = 1; i < samples.draws.size(); ++i)
                if (samples.log_densities[i] > samples.log_densities[map_idx])
                  map_idx = static_cast<int>(i);
              Eigen::VectorXd tau, apd, e2, e3;
              draw_to_fields(samples.draws[map_idx], cfg.K, cal_basis,
                             KernelFamily::Rbf, surrogate, true, &tau, &apd,
                             &e2, &e3);
              row.rmse_s2 = std::sqrt((e2 - truth_e2).squaredNorm() /
                                      basis.n_vertices());
              row.rmse_s3 = std::sqrt((e3 - truth_e3).squaredNorm() /
                                      basis.n_vertices());
            } catch (const Error& e) {
              row.error = e.what();
            }
            rows.push_back(row);
          }
        }
      }
    }
  }
  return rows;
}

}  // namespace epcal
