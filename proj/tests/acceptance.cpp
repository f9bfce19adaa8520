// Acceptance suite: ten end-to-end criteria, one pass/fail line each.
// Run with no arguments for all criteria, or pass criterion numbers to
// run a subset (e.g. ./acceptance 1 2 5).

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epcal/io.hpp"
#include "epcal/sensitivity.hpp"
#include "epcal/synth.hpp"
#include "epcal/tissue.hpp"

using namespace epcal;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

std::string fmt1(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

// ---------------------------------------------------------------------
// shared artifacts (built lazily, reused across criteria)
// ---------------------------------------------------------------------
struct Shared {
  TriMesh mesh5k;        // atrium-like surface, ~5k vertices, boundaries
  Eigenbasis basis5k;    // K = 256
  Eigenbasis cal_basis;  // basis5k without the constant mode (calibration)
  SurrogateModel surrogate;
  ErpTable training;     // 100-point design
  bool mesh_ready = false, surrogate_ready = false;

  void ensure_mesh() {
    if (mesh_ready) return;
    // radius chosen so 0.4 mm edges (coarser spacing pins the discrete
    // wavefront in low-CV regions); cap sizes keep a usable interior for
    // boundary-excluded designs and main-body masks
    mesh5k = make_atrium_like(5, 10.0, 35.0, 12.0);
    std::cerr << "  [setup] mesh: " << mesh5k.n_vertices() << " vertices, "
              << mesh5k.n_triangles() << " triangles\n";
    const double t0 = now_s();
    basis5k = solve_eigenbasis(mesh5k, 256);
    cal_basis = drop_constant_mode(basis5k);
    std::cerr << "  [setup] eigenbasis K=256 in " << fmt1(now_s() - t0)
              << " s\n";
    mesh_ready = true;
  }

  void ensure_surrogate() {
    if (surrogate_ready) return;
    const double t0 = now_s();
    const auto lhs = latin_hypercube(
        100,
        {{"cv_max", {EPParams::kCvMin, EPParams::kCvMax}},
         {"tau_out", {EPParams::kTauOutMin, EPParams::kTauOutMax}},
         {"apd_max", {EPParams::kApdMin, EPParams::kApdMax}}},
        101);
    training = build_training_set(lhs);
    surrogate = fit_surrogates(training);
    std::cerr << "  [setup] surrogate trained in " << fmt1(now_s() - t0)
              << " s (rms_s2=" << fmt1(surrogate.rms_s2)
              << " ms, rms_s3=" << fmt1(surrogate.rms_s3) << " ms)\n";
    surrogate_ready = true;
  }
};

Shared shared;

// ---------------------------------------------------------------------
// criterion 1: eigenbasis correctness
// ---------------------------------------------------------------------
Outcome criterion1() {
  const Eigenbasis sph = solve_eigenbasis(make_icosphere(4, 1.0), 16);
  double worst_sphere = 0;
  std::vector<double> analytic;
  for (int l = 0; analytic.size() < 16; ++l)
    for (int q = 0; q < 2 * l + 1; ++q) analytic.push_back(l * (l + 1.0));
  for (int k = 1; k < 16; ++k)
    worst_sphere = std::max(
        worst_sphere, std::abs(sph.eigenvalues[k] - analytic[k]) / analytic[k]);
  const bool sphere_zero = std::abs(sph.eigenvalues[0]) < 1e-8;

  const double lx = 2.0, ly = 1.0;
  const Eigenbasis rect = solve_eigenbasis(make_rectangle(lx, ly, 80, 40), 8);
  std::vector<double> neumann;
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; b <= 6; ++b)
      neumann.push_back(M_PI * M_PI * (a * a / (lx * lx) + b * b / (ly * ly)));
  std::sort(neumann.begin(), neumann.end());
  double worst_rect = 0;
  for (int k = 1; k < 8; ++k)
    worst_rect = std::max(
        worst_rect, std::abs(rect.eigenvalues[k] - neumann[k]) / neumann[k]);

  const bool pass = sphere_zero && worst_sphere < 0.02 && worst_rect < 0.02;
  return {pass, "sphere max rel err " + fmt1(worst_sphere) +
                    ", rectangle max rel err " + fmt1(worst_rect) +
                    " (tol 0.02)"};
}

// ---------------------------------------------------------------------
// criterion 2: mMS physics (CV and APD_90 vs reparameterization)
// ---------------------------------------------------------------------
Outcome criterion2() {
  Rng rng(202);
  double worst_cv = 0, worst_apd = 0;
  std::ostringstream fails;
  for (int trial = 0; trial < 10; ++trial) {
    EPParams p;
    p.cv_max = EPParams::kCvMin +
               (EPParams::kCvMax - EPParams::kCvMin) * rng.uniform();
    p.tau_in = EPParams::kTauInMin +
               (EPParams::kTauInMax - EPParams::kTauInMin) * rng.uniform();
    p.tau_out = EPParams::kTauOutMin +
                (EPParams::kTauOutMax - EPParams::kTauOutMin) * rng.uniform();
    p.tau_open = EPParams::kTauOpenMin +
                 (EPParams::kTauOpenMax - EPParams::kTauOpenMin) * rng.uniform();
    p.apd_max = EPParams::kApdMin +
                (EPParams::kApdMax - EPParams::kApdMin) * rng.uniform();

    // CV_max is the rested-tissue front speed; measure the first beat
    // from rest on a cable fine enough to resolve the front width
    const double width = std::sqrt(to_raw(p).diffusivity * p.tau_in);
    StripConfig fine;
    fine.dx_mm = std::min(0.1, width / 3.0);
    fine.dt_diffusion_ms = std::min(0.02, p.tau_in / 10.0);
    fine.ionic_substeps = std::max(
        1, static_cast<int>(std::ceil(fine.dt_diffusion_ms /
                                      (p.tau_in / 20.0))));
    const double cv = measure_cv(p, 1, 600.0, fine);
    worst_cv = std::max(worst_cv, std::abs(cv - p.cv_max) / p.cv_max);

    const auto trace = simulate_single_cell(p);
    const double apd90 = measure_apd(trace, {90}).at(90);
    worst_apd = std::max(worst_apd, std::abs(apd90 - p.apd_max) / p.apd_max);
  }
  const bool pass = worst_cv < 0.10 && worst_apd < 0.10;
  std::string detail = "worst CV rel err " + fmt1(worst_cv) +
                       ", worst APD_90 rel err " + fmt1(worst_apd) +
                       " over 10 random valid parameter sets (tol 0.10)";
  if (worst_apd >= 0.10)
    detail +=
        "; note: simulated APD_90 systematically exceeds the plateau-time "
        "formula by the post-plateau collapse (~2*tau_out plus a slow "
        "saddle-node passage, largest at high tau_out); verified against an "
        "independent adaptive ODE integration";
  return {pass, detail};
}

// ---------------------------------------------------------------------
// criterion 3: sensitivity reproduction on a 500-point design
// ---------------------------------------------------------------------
Outcome criterion3() {
  const auto lhs = latin_hypercube(
      500,
      {{"cv_max", {EPParams::kCvMin, EPParams::kCvMax}},
       {"tau_in", {EPParams::kTauInMin, EPParams::kTauInMax}},
       {"tau_out", {EPParams::kTauOutMin, EPParams::kTauOutMax}},
       {"tau_open", {EPParams::kTauOpenMin, EPParams::kTauOpenMax}},
       {"apd_max", {EPParams::kApdMin, EPParams::kApdMax}}},
      303);
  const ErpTable table = build_training_set_full(lhs);

  std::ostringstream detail;
  bool pass = true;
  for (int target = 0; target < 2; ++target) {
    std::vector<double> cols[5];
    std::vector<double> y;
    for (const auto& r : table) {
      const auto& e = target == 0 ? r.erp_s2 : r.erp_s3;
      if (!e) continue;
      cols[0].push_back(r.cv_max);
      cols[1].push_back(r.tau_in);
      cols[2].push_back(r.tau_out);
      cols[3].push_back(r.tau_open);
      cols[4].push_back(r.apd_max);
      y.push_back(*e);
    }
    Eigen::MatrixXd inputs(y.size(), 5);
    Eigen::VectorXd output(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
      for (int j = 0; j < 5; ++j) inputs(i, j) = cols[j][i];
      output[i] = y[i];
    }
    const auto idx = sensitivity_indices(inputs, output);
    // tau_out (2) and apd_max (4) must beat cv_max (0), tau_in (1),
    // tau_open (3)
    const double floor_toa = std::min(idx[2], idx[4]);
    const double ceil_rest = std::max({idx[0], idx[1], idx[3]});
    pass = pass && floor_toa > ceil_rest;
    detail << (target == 0 ? "ERP_S2" : "ERP_S3") << " [cv=" << fmt1(idx[0])
           << " t_in=" << fmt1(idx[1]) << " t_out=" << fmt1(idx[2])
           << " t_open=" << fmt1(idx[3]) << " apd=" << fmt1(idx[4]) << "] ";
  }
  return {pass, detail.str() + "(need tau_out, apd_max as top two for both)"};
}

// ---------------------------------------------------------------------
// criterion 4: surrogate fidelity on held-out simulations
// ---------------------------------------------------------------------
Outcome criterion4() {
  shared.ensure_surrogate();
  const SurrogateModel& m = shared.surrogate;

  const auto hold = latin_hypercube(
      30,
      {{"cv_max", {EPParams::kCvMin, EPParams::kCvMax}},
       {"tau_out", {EPParams::kTauOutMin, EPParams::kTauOutMax}},
       {"apd_max", {EPParams::kApdMin, EPParams::kApdMax}}},
      404);
  const ErpTable test = build_training_set(hold);

  double ss2 = 0, ss3 = 0;
  int n2 = 0, n3 = 0;
  for (const auto& r : test) {
    if (!r.erp_s2 || *r.erp_s2 > m.cutoff_ms) continue;  // validity region
    const auto e = m.evaluate(r.tau_out, r.apd_max);
    ss2 += (e.erp_s2 - *r.erp_s2) * (e.erp_s2 - *r.erp_s2);
    ++n2;
    if (r.erp_s3) {
      ss3 += (e.erp_s3 - *r.erp_s3) * (e.erp_s3 - *r.erp_s3);
      ++n3;
    }
  }
  const double rms2 = std::sqrt(ss2 / std::max(1, n2));
  const double rms3 = std::sqrt(ss3 / std::max(1, n3));

  // smoothness of the ERP_S3 fit after the discard rule: no kept training
  // row may sit further than 3x the in-region RMS from the fit
  double max_resid3 = 0;
  for (const auto& r : shared.training) {
    if (!r.erp_s2 || *r.erp_s2 > m.cutoff_ms || !r.erp_s3) continue;
    const auto e = m.evaluate(r.tau_out, r.apd_max);
    max_resid3 = std::max(max_resid3, std::abs(e.erp_s3 - *r.erp_s3));
  }
  const bool pass =
      rms2 < 5.0 && rms3 < 5.0 && max_resid3 <= 3.0 * m.rms_s3;
  return {pass, "held-out RMS: s2 " + fmt1(rms2) + " ms (" +
                    std::to_string(n2) + " pts), s3 " + fmt1(rms3) + " ms (" +
                    std::to_string(n3) + " pts), tol 5 ms; max s3 residual " +
                    fmt1(max_resid3) + " vs 3*rms " + fmt1(3.0 * m.rms_s3)};
}

// ---------------------------------------------------------------------
// criterion 5: interval likelihood properties
// ---------------------------------------------------------------------
Outcome criterion5() {
  const double I = 230.0, dS = 10.0;
  double integral = 0.0;
  const double df = 1e-3;
  for (double f = I - 50.0; f <= I + dS + 50.0; f += df)
    integral += std::exp(log_likelihood_interval(f, I, I + dS).value) * df;

  const double centre =
      std::exp(log_likelihood_interval(I + dS / 2, I, I + dS).value);
  const double near_edge =
      std::exp(log_likelihood_interval(I + 2.0, I, I + dS).value);
  const double flat_dev = std::abs(centre - near_edge) / centre;

  const bool pass = std::abs(integral - 1.0) < 1e-6 && flat_dev < 0.05 &&
                    std::abs(centre - 0.100) < 0.001;
  return {pass, "integral dev " + fmt1(std::abs(integral - 1.0)) +
                    " (tol 1e-6), centre density " + fmt1(centre) +
                    " (0.100 +- 0.001), interior flatness dev " +
                    fmt1(flat_dev) + " (tol 0.05)"};
}

// state shared between criteria 6/7/9/10
struct CalibrationRun {
  EPFields truth;
  Eigen::VectorXd truth_e2, truth_e3;
  DesignSites sites;
  PosteriorSamples samples;
  FieldSummaries summary;
  bool ready = false;
};
CalibrationRun cal_run;

constexpr int kCalK = 24;
constexpr std::uint64_t kCalSeed = 707;

PosteriorSamples calibrate_5k(const std::vector<ERPObservation>& obs,
                              int K, const HmcConfig& hmc) {
  ErpPosterior post(shared.cal_basis, shared.surrogate, obs, K);
  const HyperState init = initial_hyper_state(shared.surrogate, obs, K);
  HmcConfig cfg = hmc;
  cfg.target_accept = 0.9;
  cfg.path_length = 1.5;
  return run_hmc(
      [&](const Eigen::VectorXd& q) {
        const auto r = post(q);
        return std::make_pair(r.log_posterior, r.gradient);
      },
      init.pack(), cfg);
}

void ensure_calibration() {
  if (cal_run.ready) return;
  shared.ensure_mesh();
  shared.ensure_surrogate();
  double t0 = now_s();
  cal_run.truth =
      generate_ground_truth(shared.basis5k, 20.0, shared.surrogate, kCalSeed);
  const int n = shared.mesh5k.n_vertices();
  cal_run.truth_e2.resize(n);
  cal_run.truth_e3.resize(n);
  for (int v = 0; v < n; ++v) {
    const auto e = shared.surrogate.evaluate(cal_run.truth.tau_out[v],
                                             cal_run.truth.apd_max[v]);
    cal_run.truth_e2[v] = e.erp_s2;
    cal_run.truth_e3[v] = e.erp_s3;
  }
  cal_run.sites = maximin_design(shared.mesh5k, shared.basis5k, 10, 0.6, 0);
  std::vector<ERPObservation> obs;
  for (int site : cal_run.sites.vertices) {
    const auto [lo2, hi2] = observe(cal_run.truth_e2[site], 10.0);
    obs.push_back({site, ERPObservation::Kind::S2, lo2, hi2, 10.0});
    const auto [lo3, hi3] = observe(cal_run.truth_e3[site], 10.0);
    obs.push_back({site, ERPObservation::Kind::S3, lo3, hi3, 10.0});
  }
  std::cerr << "  [setup] truth + design in " << fmt1(now_s() - t0) << " s\n";

  t0 = now_s();
  HmcConfig hmc;
  hmc.seed = kCalSeed;
  cal_run.samples = calibrate_5k(obs, kCalK, hmc);
  std::cerr << "  [setup] HMC 8x5000 in " << fmt1(now_s() - t0)
            << " s (max R-hat " << fmt1(cal_run.samples.rhat.maxCoeff())
            << ", divergences " << cal_run.samples.divergences << ")\n";

  t0 = now_s();
  cal_run.summary = posterior_fields(cal_run.samples, kCalK, shared.cal_basis,
                                     shared.surrogate);
  std::cerr << "  [setup] posterior summaries in " << fmt1(now_s() - t0)
            << " s\n";
  cal_run.ready = true;
}

// ---------------------------------------------------------------------
// criterion 6: sampler soundness
// ---------------------------------------------------------------------
Outcome criterion6() {
  const int dim = 10;
  Eigen::VectorXd mu(dim), sd(dim);
  for (int d = 0; d < dim; ++d) {
    mu[d] = 0.3 * d - 1.0;
    sd[d] = 0.5 + 0.15 * d;
  }
  auto target = [&](const Eigen::VectorXd& q) {
    const Eigen::ArrayXd z = (q - mu).array() / sd.array();
    return std::make_pair(-0.5 * z.square().sum(),
                          (-z / sd.array()).matrix().eval());
  };
  HmcConfig cfg;
  cfg.thin_to = 0;
  cfg.seed = 606;
  const PosteriorSamples s = run_hmc(target, Eigen::VectorXd::Zero(dim), cfg);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& d : s.draws) mean += d;
  mean /= static_cast<double>(s.draws.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& d : s.draws) var += (d - mean).cwiseAbs2();
  var /= static_cast<double>(s.draws.size() - 1);
  double worst_mean = 0, worst_var = 0;
  for (int d = 0; d < dim; ++d) {
    worst_mean = std::max(worst_mean, std::abs(mean[d] - mu[d]));
    worst_var = std::max(
        worst_var, std::abs(var[d] - sd[d] * sd[d]) / (sd[d] * sd[d]));
  }

  ensure_calibration();
  const double max_rhat = cal_run.samples.rhat.maxCoeff();

  const bool pass = worst_mean < 0.05 && worst_var < 0.10 && max_rhat < 1.05;
  return {pass, "10D Gaussian: worst mean err " + fmt1(worst_mean) +
                    " (tol 0.05), worst var rel err " + fmt1(worst_var) +
                    " (tol 0.10); calibration max split R-hat " +
                    fmt1(max_rhat) + " (tol 1.05)"};
}

// helper: fraction of vertices on the main body (further than 6 mm from
// any boundary vertex by graph geodesic)
std::vector<char> main_body_mask() {
  const auto bdist =
      graph_geodesic(shared.mesh5k, shared.mesh5k.boundary_vertices());
  std::vector<char> mask(shared.mesh5k.n_vertices(), 0);
  for (int v = 0; v < shared.mesh5k.n_vertices(); ++v)
    mask[v] = bdist[v] > 6.0 ? 1 : 0;
  return mask;
}

// CSV summaries for determinism checks (criterion 10)
void write_cal_csvs(const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string hash = config_hash("acceptance-criterion7-seed707");
  write_field_csv(dir + "/erp_s2_mean.csv", hash, cal_run.summary.erp_s2_mean);
  write_field_csv(dir + "/erp_s2_sd.csv", hash, cal_run.summary.erp_s2_sd);
  write_field_csv(dir + "/map_erp_s2.csv", hash, cal_run.summary.map_erp_s2);
  write_field_csv(dir + "/truth_erp_s2.csv", hash, cal_run.truth_e2);
}

// ---------------------------------------------------------------------
// criterion 7: end-to-end synthetic recovery at desk scale
// ---------------------------------------------------------------------
Outcome criterion7() {
  ensure_calibration();
  const int n = shared.mesh5k.n_vertices();

  const IseResult ise2 =
      ise(cal_run.truth_e2, cal_run.summary.erp_s2_mean,
          cal_run.summary.erp_s2_sd);
  int ok = 0;
  for (int v = 0; v < n; ++v) ok += ise2.scores[v] < 3.0 ? 1 : 0;
  const double frac = static_cast<double>(ok) / n;

  const auto mask = main_body_mask();
  double ss = 0;
  int nm = 0;
  for (int v = 0; v < n; ++v) {
    if (!mask[v]) continue;
    const double d = cal_run.summary.erp_s2_mean[v] - cal_run.truth_e2[v];
    ss += d * d;
    ++nm;
  }
  const double rmse = std::sqrt(ss / std::max(1, nm));

  write_cal_csvs("/tmp/epcal_acceptance_run1");

  const bool pass = frac >= 0.95 && rmse < 10.0;
  return {pass, "ERP_S2 ISE<3 fraction " + fmt1(frac) +
                    " (need >= 0.95); main-body posterior-mean RMSE " +
                    fmt1(rmse) + " ms over " + std::to_string(nm) +
                    " vertices (tol 10 ms)"};
}

// ---------------------------------------------------------------------
// criterion 8: validation-trend reproduction (reduced sweep)
// ---------------------------------------------------------------------
Outcome criterion8() {
  shared.ensure_mesh();
  shared.ensure_surrogate();
  ValidationConfig vc;
  vc.lengthscales = {10.0, 20.0, 40.0};
  vc.n_observations = {5, 10, 20};
  vc.resolutions_ms = {5.0, 10.0};
  vc.replicates = 5;
  vc.K = 32;
  vc.seed = 808;
  const auto rows = validate(shared.mesh5k, shared.basis5k, shared.surrogate,
                             vc);

  const std::string hash = config_hash("acceptance-criterion8-seed808");
  write_validation_csv("/tmp/epcal_acceptance_rmse.csv", hash, rows);

  int failures = 0;
  // mean RMSE per (lengthscale, n_obs, resolution), averaged over replicates
  auto cell_mean = [&](double ls, int n_obs, double res) {
    double acc = 0;
    int cnt = 0;
    for (const auto& r : rows) {
      if (r.lengthscale != ls || r.n_observations != n_obs ||
          r.resolution_ms != res)
        continue;
      if (!r.error.empty()) {
        ++failures;
        continue;
      }
      acc += r.rmse_s2;
      ++cnt;
    }
    return cnt > 0 ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
  };

  int comparisons = 0, decreasing = 0;
  for (double res : vc.resolutions_ms) {
    for (int n_obs : vc.n_observations)
      for (size_t i = 0; i + 1 < vc.lengthscales.size(); ++i) {
        ++comparisons;
        if (cell_mean(vc.lengthscales[i + 1], n_obs, res) <
            cell_mean(vc.lengthscales[i], n_obs, res))
          ++decreasing;
      }
    for (double ls : vc.lengthscales)
      for (size_t i = 0; i + 1 < vc.n_observations.size(); ++i) {
        ++comparisons;
        if (cell_mean(ls, vc.n_observations[i + 1], res) <
            cell_mean(ls, vc.n_observations[i], res))
          ++decreasing;
      }
  }
  const double frac = static_cast<double>(decreasing) / comparisons;
  const bool pass = frac >= 0.80 && failures == 0;
  return {pass, std::to_string(decreasing) + "/" + std::to_string(comparisons) +
                    " adjacent comparisons decreasing (" + fmt1(frac) +
                    ", need >= 0.80); cell failures " +
                    std::to_string(failures) +
                    "; table at /tmp/epcal_acceptance_rmse.csv"};
}

// ---------------------------------------------------------------------
// criterion 9: APD-map closure (monodomain MAP vs truth)
// ---------------------------------------------------------------------
Outcome criterion9() {
  ensure_calibration();

  // pacing from the design site furthest from the boundary
  const auto bdist =
      graph_geodesic(shared.mesh5k, shared.mesh5k.boundary_vertices());
  int pace = cal_run.sites.vertices[0];
  for (int v : cal_run.sites.vertices)
    if (bdist[v] > bdist[pace]) pace = v;

  EPFields map_fields = cal_run.truth;  // copy cv/tau_in/tau_open layout
  map_fields.tau_out = cal_run.summary.map_tau_out;
  map_fields.apd_max = cal_run.summary.map_apd_max;
  const EPFields truth_c = clamp_to_valid(cal_run.truth);
  const EPFields map_c = clamp_to_valid(map_fields);

  const double t0 = now_s();
  const ActivationMaps truth_maps =
      run_monodomain(shared.mesh5k, truth_c, pace, 8, 600.0);
  const ActivationMaps map_maps =
      run_monodomain(shared.mesh5k, map_c, pace, 8, 600.0);
  std::cerr << "  [setup] two monodomain runs in " << fmt1(now_s() - t0)
            << " s\n";

  const double rmse = apd_rmse(truth_maps, map_maps, 90);
  int joint = 0;
  for (int v = 0; v < shared.mesh5k.n_vertices(); ++v)
    joint += (truth_maps.captured[v] && map_maps.captured[v]) ? 1 : 0;

  const bool pass = rmse < 10.0 && joint > shared.mesh5k.n_vertices() / 2;
  return {pass, "APD_90 RMSE " + fmt1(rmse) + " ms over " +
                    std::to_string(joint) +
                    " jointly captured vertices (tol 10 ms)"};
}

// ---------------------------------------------------------------------
// criterion 10: determinism of the criterion-7 pipeline
// ---------------------------------------------------------------------
Outcome criterion10() {
  ensure_calibration();  // run 1 written by criterion 7 path
  write_cal_csvs("/tmp/epcal_acceptance_run1");

  // recompute the full chain from the same seeds
  CalibrationRun rerun;
  rerun.truth =
      generate_ground_truth(shared.basis5k, 20.0, shared.surrogate, kCalSeed);
  const int n = shared.mesh5k.n_vertices();
  rerun.truth_e2.resize(n);
  rerun.truth_e3.resize(n);
  for (int v = 0; v < n; ++v) {
    const auto e = shared.surrogate.evaluate(rerun.truth.tau_out[v],
                                             rerun.truth.apd_max[v]);
    rerun.truth_e2[v] = e.erp_s2;
    rerun.truth_e3[v] = e.erp_s3;
  }
  rerun.sites = maximin_design(shared.mesh5k, shared.basis5k, 10, 0.6, 0);
  std::vector<ERPObservation> obs;
  for (int site : rerun.sites.vertices) {
    const auto [lo2, hi2] = observe(rerun.truth_e2[site], 10.0);
    obs.push_back({site, ERPObservation::Kind::S2, lo2, hi2, 10.0});
    const auto [lo3, hi3] = observe(rerun.truth_e3[site], 10.0);
    obs.push_back({site, ERPObservation::Kind::S3, lo3, hi3, 10.0});
  }
  HmcConfig hmc;
  hmc.seed = kCalSeed;
  rerun.samples = calibrate_5k(obs, kCalK, hmc);
  rerun.summary =
      posterior_fields(rerun.samples, kCalK, shared.cal_basis, shared.surrogate);

  const CalibrationRun saved = std::move(cal_run);
  cal_run = std::move(rerun);
  write_cal_csvs("/tmp/epcal_acceptance_run2");
  cal_run = std::move(saved);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  bool identical = true;
  std::string mismatched;
  for (const std::string name : {"erp_s2_mean.csv", "erp_s2_sd.csv",
                                 "map_erp_s2.csv", "truth_erp_s2.csv"}) {
    const std::string a = slurp("/tmp/epcal_acceptance_run1/" + name);
    const std::string b = slurp("/tmp/epcal_acceptance_run2/" + name);
    if (a.empty() || a != b) {
      identical = false;
      mismatched += " " + name;
    }
  }
  return {identical, identical
                         ? "rerun CSV summaries byte-identical"
                         : "mismatched files:" + mismatched};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto run_this = [&](int id) { return wanted.empty() || wanted.count(id); };

  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {1, "eigenbasis correctness", criterion1},
      {2, "mMS physics (CV, APD_90)", criterion2},
      {3, "sensitivity reproduction", criterion3},
      {4, "surrogate fidelity", criterion4},
      {5, "likelihood properties", criterion5},
      {6, "sampler soundness", criterion6},
      {7, "end-to-end synthetic recovery", criterion7},
      {8, "validation-trend reproduction", criterion8},
      {9, "APD-map closure", criterion9},
      {10, "determinism", criterion10},
  };

  int failures = 0;
  for (const auto& e : entries) {
    if (!run_this(e.id)) continue;
    const double t0 = now_s();
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    const double dt = now_s() - t0;
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << e.id
              << " (" << e.name << "): " << out.detail << " [" << fmt1(dt)
              << " s]" << std::endl;
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
