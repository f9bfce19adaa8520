// Command-line pipeline driver: each subcommand reads/writes versioned
// artifact files so stages can be rerun independently. Every output file
// embeds a hash of the effective configuration (config file + flags).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "epcal/io.hpp"
#include "epcal/lengthscale.hpp"
#include "epcal/sensitivity.hpp"
#include "epcal/synth.hpp"
#include "epcal/tissue.hpp"
#include "epcal/transfer.hpp"

using namespace epcal;
using nlohmann::json;

namespace {

struct Global {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string hash;  // effective config hash, set after parsing
};

std::string out_path(const Global& g, const std::string& name) {
  std::filesystem::create_directories(g.out_dir);
  return (std::filesystem::path(g.out_dir) / name).string();
}

// json config: top-level keys = subcommand names; values = flag defaults.
json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  require(in.good(), "cannot open config file: " + path);
  json cfg;
  in >> cfg;
  return cfg;
}

// apply config-file defaults to a subcommand before parsing flags, so
// that explicit flags override the file
void apply_defaults(CLI::App* cmd, const json& cfg) {
  if (!cfg.contains(cmd->get_name())) return;
  for (const auto& [key, value] : cfg.at(cmd->get_name()).items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    require(opt != nullptr,
            "config key '" + key + "' unknown for subcommand " +
                cmd->get_name());
    if (opt->empty())
      opt->add_result(value.is_string() ? value.get<std::string>()
                                        : value.dump());
  }
}

std::string effective_config(const json& cfg, int argc, char** argv) {
  std::string text = cfg.dump();
  for (int i = 1; i < argc; ++i) {
    text += ' ';
    text += argv[i];
  }
  return text;
}

TriMesh load_any_mesh(const std::string& path, double unit_scale) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".vtk") {
    TriMesh m = read_vtk(path).mesh;
    for (auto& v : m.vertices) v *= unit_scale;
    epcal::detail::validate_mesh(m);
    return m;
  }
  return load_mesh_auto(path, unit_scale);
}

EPFields fields_from_vtk(const VtkData& data, const std::string& prefix) {
  EPFields f;
  auto get = [&](const std::string& name) {
    const auto it = data.scalars.find(prefix + name);
    require(it != data.scalars.end(),
            "missing field array '" + prefix + name + "' in VTK input");
    return it->second;
  };
  f.cv_max = get("cv_max");
  f.tau_in = get("tau_in");
  f.tau_out = get("tau_out");
  f.tau_open = get("tau_open");
  f.apd_max = get("apd_max");
  return f;
}

int run(int argc, char** argv) {
  CLI::App app{"Spatial EP-parameter calibration pipeline"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "master RNG seed");
  app.add_option("--threads", g.threads,
                 "thread budget (simulations are deterministic regardless)");

  // ---- mesh-synth ----------------------------------------------------
  auto* synth = app.add_subcommand("mesh-synth", "generate a synthetic mesh");
  std::string synth_kind = "atrium", synth_out = "mesh.ply";
  int synth_subdiv = 5, synth_nx = 50, synth_ny = 50;
  double synth_radius = 30.0, synth_lx = 50.0, synth_ly = 50.0;
  synth->add_option("--kind", synth_kind, "sphere | rectangle | atrium");
  synth->add_option("--subdiv", synth_subdiv, "icosphere subdivisions");
  synth->add_option("--radius", synth_radius, "radius (mm)");
  synth->add_option("--lx", synth_lx, "rectangle width (mm)");
  synth->add_option("--ly", synth_ly, "rectangle height (mm)");
  synth->add_option("--nx", synth_nx, "rectangle x cells");
  synth->add_option("--ny", synth_ny, "rectangle y cells");
  synth->add_option("--file", synth_out, "output PLY name");

  // ---- eigen ----------------------------------------------------------
  auto* eigen = app.add_subcommand("eigen", "Laplacian eigenbasis of a mesh");
  std::string eig_mesh;
  double eig_scale = 1.0;
  int eig_k = 256;
  eigen->add_option("--mesh", eig_mesh, "mesh file (.ply/.pts/.vtk)")
      ->required();
  eigen->add_option("--unit-scale", eig_scale, "vertex unit scale to mm");
  eigen->add_option("--k", eig_k, "number of eigenpairs");

  // ---- design ---------------------------------------------------------
  auto* design = app.add_subcommand("design", "maximin observation design");
  std::string des_mesh, des_basis;
  int des_n = 10;
  double des_excl = 0.6, des_scale = 1.0;
  design->add_option("--mesh", des_mesh)->required();
  design->add_option("--basis", des_basis, "eigenbasis artifact")->required();
  design->add_option("--n", des_n, "number of sites");
  design->add_option("--exclusion-cm", des_excl, "boundary exclusion (cm)");
  design->add_option("--unit-scale", des_scale);

  // ---- surrogate --------------------------------------------------------
  auto* surro = app.add_subcommand(
      "surrogate", "train strip-simulation ERP table and fit surrogates");
  int sur_n = 100;
  double sur_precision = 1.0;
  std::string sur_table_in;
  surro->add_option("--n-train", sur_n, "LHS design size");
  surro->add_option("--precision", sur_precision, "ERP bisection precision");
  surro->add_option("--table", sur_table_in,
                    "existing training CSV (skip simulation)");

  // ---- sensitivity ------------------------------------------------------
  auto* sens = app.add_subcommand(
      "sensitivity", "variance-based sensitivity of ERP to all parameters");
  int sens_n = 500;
  double sens_precision = 1.0;
  std::string sens_table_in;
  sens->add_option("--n", sens_n, "LHS design size");
  sens->add_option("--precision", sens_precision);
  sens->add_option("--table", sens_table_in,
                   "existing 5-parameter training CSV (skip simulation)");

  // ---- truth -------------------------------------------------------------
  auto* truth = app.add_subcommand("truth", "generate ground-truth fields");
  std::string tr_mesh, tr_basis, tr_surrogate;
  double tr_rho = 20.0, tr_scale = 1.0;
  int tr_k = 256;
  truth->add_option("--mesh", tr_mesh)->required();
  truth->add_option("--basis", tr_basis)->required();
  truth->add_option("--surrogate", tr_surrogate)->required();
  truth->add_option("--rho", tr_rho, "prior lengthscale");
  truth->add_option("--k", tr_k, "modes for truth generation");
  truth->add_option("--unit-scale", tr_scale);

  // ---- observe -------------------------------------------------------------
  auto* observe_cmd = app.add_subcommand(
      "observe", "interval observations of a truth field at design sites");
  std::string ob_truth, ob_sites;
  double ob_res = 10.0, ob_origin = 0.0;
  observe_cmd->add_option("--truth", ob_truth, "truth VTK (erp_s2/erp_s3)")
      ->required();
  observe_cmd->add_option("--sites", ob_sites, "design CSV")->required();
  observe_cmd->add_option("--res", ob_res, "protocol resolution (ms)");
  observe_cmd->add_option("--grid-origin", ob_origin, "scan grid origin (ms)");

  // ---- calibrate -----------------------------------------------------------
  auto* cal = app.add_subcommand("calibrate", "HMC posterior sampling");
  std::string cal_basis, cal_surrogate, cal_obs;
  int cal_k = 24, cal_iters = 5000, cal_chains = 8, cal_thin = 200;
  double cal_pad = 0.0;
  cal->add_option("--basis", cal_basis)->required();
  cal->add_option("--surrogate", cal_surrogate)->required();
  cal->add_option("--obs", cal_obs, "observations CSV")->required();
  cal->add_option("--k", cal_k, "eigenfunctions per field");
  cal->add_option("--iterations", cal_iters);
  cal->add_option("--chains", cal_chains);
  cal->add_option("--thin-to", cal_thin);
  cal->add_option("--pad", cal_pad, "interval padding (ms)");

  // ---- predict ---------------------------------------------------------------
  auto* pred = app.add_subcommand("predict", "posterior field summaries");
  std::string pr_mesh, pr_basis, pr_surrogate, pr_draws;
  double pr_scale = 1.0;
  bool pr_no_repair = false;
  pred->add_option("--mesh", pr_mesh)->required();
  pred->add_option("--basis", pr_basis)->required();
  pred->add_option("--surrogate", pr_surrogate)->required();
  pred->add_option("--draws", pr_draws)->required();
  pred->add_option("--unit-scale", pr_scale);
  pred->add_flag("--no-repair", pr_no_repair,
                 "skip constraint repair of posterior fields");

  // ---- simulate ---------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "monodomain APD maps");
  std::string sim_mesh, sim_fields, sim_prefix;
  double sim_scale = 1.0, sim_cycle = 600.0;
  int sim_pacing = 0, sim_beats = 8;
  sim->add_option("--mesh", sim_mesh)->required();
  sim->add_option("--fields", sim_fields, "VTK with parameter arrays")
      ->required();
  sim->add_option("--prefix", sim_prefix,
                  "array-name prefix in the fields file (e.g. map_)");
  sim->add_option("--pacing-vertex", sim_pacing);
  sim->add_option("--beats", sim_beats);
  sim->add_option("--cycle", sim_cycle, "pacing cycle length (ms)");
  sim->add_option("--unit-scale", sim_scale);

  // ---- validate ----------------------------------------------------------------
  auto* val = app.add_subcommand("validate", "quantitative validation sweep");
  std::string val_mesh, val_basis, val_surrogate, val_grid = "small";
  double val_scale = 1.0;
  val->add_option("--mesh", val_mesh)->required();
  val->add_option("--basis", val_basis)->required();
  val->add_option("--surrogate", val_surrogate)->required();
  val->add_option("--grid", val_grid, "small | paper");
  val->add_option("--unit-scale", val_scale);

  // pre-parse to locate --config, then inject file defaults
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") g.config_path = argv[i + 1];
  const json cfg = load_config(g.config_path);
  for (auto* cmd : app.get_subcommands({})) apply_defaults(cmd, cfg);

  CLI11_PARSE(app, argc, argv);
  g.hash = config_hash(effective_config(cfg, argc, argv));

  if (synth->parsed()) {
    TriMesh m;
    if (synth_kind == "sphere")
      m = make_icosphere(synth_subdiv, synth_radius);
    else if (synth_kind == "rectangle")
      m = make_rectangle(synth_lx, synth_ly, synth_nx, synth_ny);
    else if (synth_kind == "atrium")
      m = make_atrium_like(synth_subdiv, synth_radius);
    else
      throw Error("unknown mesh kind: " + synth_kind);
    save_ply(m, out_path(g, synth_out));
    std::cout << "wrote " << out_path(g, synth_out) << " (" << m.n_vertices()
              << " vertices)\n";
  }

  if (eigen->parsed()) {
    const TriMesh m = load_any_mesh(eig_mesh, eig_scale);
    const Eigenbasis basis = solve_eigenbasis(m, eig_k);
    save_eigenbasis(out_path(g, "eigenbasis.txt"), g.hash, basis);
    std::vector<std::vector<double>> rows;
    for (int k = 0; k < basis.K(); ++k)
      rows.push_back({static_cast<double>(k), basis.eigenvalues[k]});
    write_csv(out_path(g, "spectrum.csv"), g.hash, {"mode", "eigenvalue"},
              rows);
    std::cout << "wrote eigenbasis.txt and spectrum.csv (K=" << basis.K()
              << ")\n";
  }

  if (design->parsed()) {
    const TriMesh m = load_any_mesh(des_mesh, des_scale);
    const Eigenbasis basis = load_eigenbasis(des_basis);
    const DesignSites sites = maximin_design(m, basis, des_n, des_excl, g.seed);
    save_design(out_path(g, "design.csv"), g.hash, sites);
    std::cout << "wrote design.csv (" << sites.vertices.size() << " sites)\n";
  }

  if (surro->parsed()) {
    ErpTable table;
    if (!sur_table_in.empty()) {
      table = read_training_csv(sur_table_in);
    } else {
      const auto lhs = latin_hypercube(
          sur_n,
          {{"cv_max", {EPParams::kCvMin, EPParams::kCvMax}},
           {"tau_out", {EPParams::kTauOutMin, EPParams::kTauOutMax}},
           {"apd_max", {EPParams::kApdMin, EPParams::kApdMax}}},
          g.seed);
      table = build_training_set(lhs, 0.05, 120.0, sur_precision);
      write_training_csv(out_path(g, "training.csv"), g.hash, table);
    }
    const SurrogateModel model = fit_surrogates(table);
    model.save(out_path(g, "surrogate.txt"));
    std::cout << "fit surrogates: rms_s2=" << model.rms_s2
              << " ms, rms_s3=" << model.rms_s3 << " ms\n";
  }

  if (sens->parsed()) {
    ErpTable table;
    if (!sens_table_in.empty()) {
      table = read_training_csv(sens_table_in);
    } else {
      const auto lhs = latin_hypercube(
          sens_n,
          {{"cv_max", {EPParams::kCvMin, EPParams::kCvMax}},
           {"tau_in", {EPParams::kTauInMin, EPParams::kTauInMax}},
           {"tau_out", {EPParams::kTauOutMin, EPParams::kTauOutMax}},
           {"tau_open", {EPParams::kTauOpenMin, EPParams::kTauOpenMax}},
           {"apd_max", {EPParams::kApdMin, EPParams::kApdMax}}},
          g.seed);
      table = build_training_set_full(lhs, sens_precision);
      write_training_csv(out_path(g, "sensitivity_training.csv"), g.hash,
                         table);
    }
    const char* names[5] = {"cv_max", "tau_in", "tau_out", "tau_open",
                            "apd_max"};
    std::vector<std::vector<double>> rows;
    for (int target = 0; target < 2; ++target) {
      std::vector<double> col[5];
      std::vector<double> y;
      for (const auto& r : table) {
        const auto& e = target == 0 ? r.erp_s2 : r.erp_s3;
        if (!e) continue;
        col[0].push_back(r.cv_max);
        col[1].push_back(r.tau_in);
        col[2].push_back(r.tau_out);
        col[3].push_back(r.tau_open);
        col[4].push_back(r.apd_max);
        y.push_back(*e);
      }
      Eigen::MatrixXd inputs(y.size(), 5);
      Eigen::VectorXd output(y.size());
      for (size_t i = 0; i < y.size(); ++i) {
        for (int j = 0; j < 5; ++j) inputs(i, j) = col[j][i];
        output[i] = y[i];
      }
      const auto idx = sensitivity_indices(inputs, output);
      for (int j = 0; j < 5; ++j)
        rows.push_back({static_cast<double>(target), static_cast<double>(j),
                        idx[j]});
      std::cout << (target == 0 ? "ERP_S2" : "ERP_S3") << " indices:";
      for (int j = 0; j < 5; ++j) std::cout << ' ' << names[j] << '=' << idx[j];
      std::cout << "\n";
    }
    write_csv(out_path(g, "sensitivity.csv"), g.hash,
              {"target", "parameter", "index"}, rows);
  }

  if (truth->parsed()) {
    const TriMesh m = load_any_mesh(tr_mesh, tr_scale);
    const Eigenbasis basis = load_eigenbasis(tr_basis);
    const SurrogateModel sur = SurrogateModel::load(tr_surrogate);
    const EPFields f = generate_ground_truth(basis, tr_rho, sur, g.seed, tr_k);
    Eigen::VectorXd e2(m.n_vertices()), e3(m.n_vertices());
    for (int v = 0; v < m.n_vertices(); ++v) {
      const auto e = sur.evaluate(f.tau_out[v], f.apd_max[v]);
      e2[v] = e.erp_s2;
      e3[v] = e.erp_s3;
    }
    write_vtk(out_path(g, "truth.vtk"), g.hash, m,
              {{"cv_max", f.cv_max},
               {"tau_in", f.tau_in},
               {"tau_out", f.tau_out},
               {"tau_open", f.tau_open},
               {"apd_max", f.apd_max},
               {"erp_s2", e2},
               {"erp_s3", e3}});
    write_field_csv(out_path(g, "truth_tau_out.csv"), g.hash, f.tau_out);
    write_field_csv(out_path(g, "truth_apd_max.csv"), g.hash, f.apd_max);
    write_field_csv(out_path(g, "truth_erp_s2.csv"), g.hash, e2);
    write_field_csv(out_path(g, "truth_erp_s3.csv"), g.hash, e3);
    std::cout << "wrote truth.vtk and truth_*.csv\n";
  }

  if (observe_cmd->parsed()) {
    const VtkData data = read_vtk(ob_truth);
    require(data.scalars.count("erp_s2") && data.scalars.count("erp_s3"),
            "truth VTK must contain erp_s2 and erp_s3 arrays");
    const DesignSites sites = load_design(ob_sites);
    std::vector<ERPObservation> obs;
    for (int v : sites.vertices) {
      require(v >= 0 && v < data.mesh.n_vertices(), "site out of range");
      const auto [lo2, hi2] =
          observe(data.scalars.at("erp_s2")[v], ob_res, ob_origin);
      obs.push_back({v, ERPObservation::Kind::S2, lo2, hi2, ob_res});
      const auto [lo3, hi3] =
          observe(data.scalars.at("erp_s3")[v], ob_res, ob_origin);
      obs.push_back({v, ERPObservation::Kind::S3, lo3, hi3, ob_res});
    }
    write_observations_csv(out_path(g, "observations.csv"), g.hash, obs);
    std::cout << "wrote observations.csv (" << obs.size() << " intervals)\n";
  }

  if (cal->parsed()) {
    // the explicit per-field mean replaces the constant eigenfunction;
    // predict applies the same reduction when reconstructing fields
    const Eigenbasis basis = drop_constant_mode(load_eigenbasis(cal_basis));
    const SurrogateModel sur = SurrogateModel::load(cal_surrogate);
    const auto obs = read_observations_csv(cal_obs);
    ErpPosterior post(basis, sur, obs, cal_k, KernelFamily::Rbf, {}, cal_pad);

    const HyperState init = initial_hyper_state(sur, obs, cal_k);
    HmcConfig hmc;
    hmc.iterations = cal_iters;
    hmc.chains = cal_chains;
    hmc.thin_to = cal_thin;
    hmc.seed = g.seed;
    hmc.target_accept = 0.9;
    hmc.path_length = 1.5;
    const PosteriorSamples samples = run_hmc(
        [&](const Eigen::VectorXd& q) {
          const auto r = post(q);
          return std::make_pair(r.log_posterior, r.gradient);
        },
        init.pack(), hmc);
    save_draws(out_path(g, "draws.txt"), g.hash, samples, cal_k);

    std::vector<std::string> names;
    for (int l = 0; l < 2; ++l) {
      const std::string f = l == 0 ? "tau_out" : "apd_max";
      names.push_back(f + "_mean");
      names.push_back(f + "_log_amplitude");
      names.push_back(f + "_log_lengthscale");
      for (int k = 0; k < cal_k; ++k)
        names.push_back(f + "_eta" + std::to_string(k));
    }
    write_diagnostics_csv(out_path(g, "diagnostics.csv"), g.hash, samples,
                          names);
    std::cout << "kept " << samples.draws.size() << " draws; max R-hat "
              << samples.rhat.maxCoeff() << "; divergences "
              << samples.divergences << "\n";
  }

  if (pred->parsed()) {
    const TriMesh m = load_any_mesh(pr_mesh, pr_scale);
    const Eigenbasis basis = drop_constant_mode(load_eigenbasis(pr_basis));
    const SurrogateModel sur = SurrogateModel::load(pr_surrogate);
    int K = 0;
    const PosteriorSamples samples = load_draws(pr_draws, &K);
    const FieldSummaries s = posterior_fields(samples, K, basis, sur,
                                              KernelFamily::Rbf, !pr_no_repair);
    write_vtk(out_path(g, "posterior.vtk"), g.hash, m,
              {{"tau_out_mean", s.tau_out_mean},
               {"tau_out_sd", s.tau_out_sd},
               {"apd_max_mean", s.apd_max_mean},
               {"apd_max_sd", s.apd_max_sd},
               {"erp_s2_mean", s.erp_s2_mean},
               {"erp_s2_sd", s.erp_s2_sd},
               {"erp_s3_mean", s.erp_s3_mean},
               {"erp_s3_sd", s.erp_s3_sd},
               {"map_tau_out", s.map_tau_out},
               {"map_apd_max", s.map_apd_max},
               {"map_erp_s2", s.map_erp_s2},
               {"map_erp_s3", s.map_erp_s3}});
    write_field_csv(out_path(g, "erp_s2_mean.csv"), g.hash, s.erp_s2_mean);
    write_field_csv(out_path(g, "erp_s2_sd.csv"), g.hash, s.erp_s2_sd);
    write_field_csv(out_path(g, "map_erp_s2.csv"), g.hash, s.map_erp_s2);
    std::cout << "wrote posterior.vtk and summary CSVs\n";
  }

  if (sim->parsed()) {
    const TriMesh m = load_any_mesh(sim_mesh, sim_scale);
    const VtkData data = read_vtk(sim_fields);
    EPFields f = fields_from_vtk(data, sim_prefix);
    if (sim_prefix.rfind("map", 0) == 0) f = clamp_to_valid(f);
    const ActivationMaps maps =
        run_monodomain(m, f, sim_pacing, sim_beats, sim_cycle);
    std::vector<std::pair<std::string, Eigen::VectorXd>> arrays{
        {"act_ms", maps.activation_ms}};
    for (const auto& [level, map] : maps.apd_ms)
      arrays.emplace_back("apd" + std::to_string(level) + "_ms", map);
    write_vtk(out_path(g, "maps.vtk"), g.hash, m, arrays);
    write_field_csv(out_path(g, "apd90_ms.csv"), g.hash, maps.apd_ms.at(90));
    int captured = 0;
    for (char c : maps.captured) captured += c;
    std::cout << "wrote maps.vtk; " << captured << "/" << m.n_vertices()
              << " vertices captured\n";
  }

  if (val->parsed()) {
    const TriMesh m = load_any_mesh(val_mesh, val_scale);
    const Eigenbasis basis = load_eigenbasis(val_basis);
    const SurrogateModel sur = SurrogateModel::load(val_surrogate);
    ValidationConfig vc;
    vc.seed = g.seed;
    if (val_grid == "small") {
      vc.replicates = 2;
      vc.hmc.iterations = 1000;
      vc.hmc.chains = 4;
    } else if (val_grid == "paper") {
      vc.replicates = 5;
      vc.designs_per_replicate = 5;
    } else {
      throw Error("unknown validation grid: " + val_grid);
    }
    const auto rows = validate(m, basis, sur, vc);
    write_validation_csv(out_path(g, "rmse.csv"), g.hash, rows);
    std::cout << "wrote rmse.csv (" << rows.size() << " cells)\n";
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
