#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <map>

#include "epcal/distance.hpp"
#include "epcal/fields.hpp"
#include "epcal/laplacian.hpp"

namespace epcal {

/// Per-vertex activation time and APD maps for the final beat.
struct ActivationMaps {
  Eigen::VectorXd activation_ms;             // NaN where no capture
  std::map<int, Eigen::VectorXd> apd_ms;     // level (20/30/50/90) -> map
  std::vector<char> captured;                // activation + all levels found
};

struct TissueConfig {
  double dt_diffusion_ms = 0.1;
  int ionic_substeps = 5;
  double stim_radius_mm = 1.5;
  double stim_duration_ms = 2.0;
  double stim_amplitude = 0.5;
  double capture_window_ms = 100.0;
  std::vector<int> apd_levels = {20, 30, 50, 90};
};

/// Monodomain mMS simulation on a triangulated surface: P1 FEM diffusion
/// with per-element diffusivity (vertex values element-averaged),
/// backward-Euler diffusion step, forward-Euler reaction substeps.
/// Pacing from a vertex neighbourhood for `n_beats` at `cycle_ms`;
/// activation and repolarization maps are measured on the final beat
/// (0.7 upstroke; 0.8/0.7/0.5/0.1 downstrokes for APD 20/30/50/90).
inline ActivationMaps run_monodomain(const TriMesh& mesh,
                                     const EPFields& fields,
                                     int pacing_vertex, int n_beats,
                                     double cycle_ms,
                                     TissueConfig cfg = {}) {
  const int n = mesh.n_vertices();
  require(fields.n_vertices() == n, "fields/mesh size mismatch");
  fields.validate();
  require(pacing_vertex >= 0 && pacing_vertex < n, "pacing vertex invalid");
  require(n_beats >= 1 && cycle_ms > 0, "invalid pacing settings");

  // vertex-wise raw parameters
  Eigen::ArrayXd tau_in(n), tau_out(n), tau_open(n), tau_close(n), diff(n);
  for (int v = 0; v < n; ++v) {
    const MMSRawParams raw = to_raw(fields.at(v));
    tau_in[v] = raw.tau_in;
    tau_out[v] = raw.tau_out;
    tau_open[v] = raw.tau_open;
    tau_close[v] = raw.tau_close;
    diff[v] = raw.diffusivity;
  }

  // element-averaged diffusivity into the stiffness assembly
  std::vector<double> elem_d(mesh.n_triangles());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    elem_d[t] = (diff[tri[0]] + diff[tri[1]] + diff[tri[2]]) / 3.0;
  }
  const SparseMat stiff = cotan_stiffness(mesh, &elem_d);
  const Vector mass = lumped_mass(mesh);

  const double dt = cfg.dt_diffusion_ms;
  SparseMat system = stiff * dt;
  for (int v = 0; v < n; ++v) system.coeffRef(v, v) += mass[v];
  system.makeCompressed();
  Eigen::SimplicialLDLT<SparseMat> solver(system);
  require(solver.info() == Eigen::Success, "diffusion factorization failed");

  // stimulated vertex set
  std::vector<int> stim_verts;
  {
    const auto geo = graph_geodesic(mesh, {pacing_vertex});
    for (int v = 0; v < n; ++v)
      if (geo[v] <= cfg.stim_radius_mm) stim_verts.push_back(v);
  }

  Eigen::ArrayXd vm = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd h = Eigen::ArrayXd::Ones(n);
  const double dt_ion = dt / cfg.ionic_substeps;
  const double t_final_beat = (n_beats - 1) * cycle_ms;
  const double t_end = t_final_beat + cycle_ms;

  static const std::map<int, double> kDown = {
      {20, 0.8}, {30, 0.7}, {50, 0.5}, {90, 0.1}};

  ActivationMaps maps;
  maps.activation_ms =
      Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (int lvl : cfg.apd_levels)
    maps.apd_ms[lvl] =
        Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  Eigen::ArrayXd vm_prev = vm;
  bool pacing_captured_first_beat = false;

  double time = 0.0;
  while (time < t_end - 1e-9) {
    vm_prev = vm;
    for (int s = 0; s < cfg.ionic_substeps; ++s) {
      const double t_sub = time + s * dt_ion;
      // position within the current cycle
      const double beat_onset =
          std::floor(t_sub / cycle_ms + 1e-12) * cycle_ms;
      const bool stim_on = (t_sub - beat_onset) < cfg.stim_duration_ms &&
                           beat_onset < n_beats * cycle_ms - 1e-9;
      const Eigen::ArrayXd vm_sub = vm;
      vm += dt_ion * (h * vm_sub * (vm_sub - kVGate) * (1.0 - vm_sub) / tau_in -
                      (1.0 - h) * vm_sub / tau_out);
      if (stim_on)
        for (int v : stim_verts) vm[v] += dt_ion * cfg.stim_amplitude;
      h += dt_ion * ((vm_sub <= kVGate)
                         .select((1.0 - h) / tau_open, -h / tau_close));
    }
    // diffusion: (M + dt S) v_new = M v
    vm = solver.solve((mass.array() * vm).matrix()).array();
    require(vm.allFinite(), "numerical blow-up in monodomain simulation");
    time += dt;

    // first-beat capture check at the pacing vertex
    if (!pacing_captured_first_beat && time <= cfg.capture_window_ms &&
        vm[pacing_vertex] >= 0.7)
      pacing_captured_first_beat = true;

    if (time > t_final_beat) {
      for (int v = 0; v < n; ++v) {
        const double a = vm_prev[v], b = vm[v];
        if (std::isnan(maps.activation_ms[v])) {
          if (a < 0.7 && b >= 0.7) {
            const double f = (0.7 - a) / (b - a);
            maps.activation_ms[v] = time - dt + f * dt;
          }
          continue;
        }
        for (int lvl : cfg.apd_levels) {
          auto& apd = maps.apd_ms[lvl];
          if (!std::isnan(apd[v])) continue;
          const double thr = kDown.at(lvl);
          if (a > thr && b <= thr) {
            const double f = (a - thr) / (a - b);
            apd[v] = (time - dt + f * dt) - maps.activation_ms[v];
          }
        }
      }
    }
  }
  require(pacing_captured_first_beat,
          "failure of capture at the pacing site");

  maps.captured.assign(n, 1);
  for (int v = 0; v < n; ++v) {
    if (std::isnan(maps.activation_ms[v])) {
      maps.captured[v] = 0;
      continue;
    }
    for (int lvl : cfg.apd_levels)
      if (std::isnan(maps.apd_ms.at(lvl)[v])) maps.captured[v] = 0;
  }
  return maps;
}

/// RMS APD difference at one level over vertices captured in both maps.
inline double apd_rmse(const ActivationMaps& a, const ActivationMaps& b,
                       int level) {
  const auto& fa = a.apd_ms.at(level);
  const auto& fb = b.apd_ms.at(level);
  require(fa.size() == fb.size(), "maps are from different meshes");
  double acc = 0;
  long count = 0;
  for (int v = 0; v < fa.size(); ++v) {
    if (!a.captured[v] || !b.captured[v]) continue;
    const double d = fa[v] - fb[v];
    acc += d * d;
    ++count;
  }
  require(count > 0, "no vertices captured in both maps");
  return std::sqrt(acc / count);
}

}  // namespace epcal
