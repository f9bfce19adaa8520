#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "epcal/mms.hpp"

namespace epcal {

/// Time/voltage trace at a probe site.
struct ActionPotentialTrace {
  std::vector<double> time_ms;
  std::vector<double> vm;
};

/// Pacing protocol for ERP measurement.
struct PacingProtocol {
  enum class Kind { S1S2, S1S2S3 };
  Kind kind = Kind::S1S2;
  double s1_ms = 600.0;
  double s2_ms = 300.0;  // only for S1S2S3
  int n_s1_beats = 8;
  double scan_lo_ms = 100.0;
  double scan_hi_ms = 400.0;

  void validate() const {
    require(n_s1_beats >= 1, "need at least one S1 beat");
    require(scan_lo_ms < scan_hi_ms, "scan bounds inverted");
    require(s1_ms > scan_lo_ms, "S1 must exceed the scan lower bound");
    if (kind == Kind::S1S2S3)
      require(s1_ms > s2_ms && s2_ms > scan_lo_ms,
              "S1 > S2 > scan lower bound required");
  }
};

/// Cable geometry and numerics for the strip ("surrogate") simulation.
struct StripConfig {
  double length_mm = 20.0;
  double dx_mm = 0.3;
  double dt_diffusion_ms = 0.1;
  int ionic_substeps = 5;  // 0.02 ms ionic step
  double stim_extent_mm = 1.0;
  double stim_duration_ms = 2.0;
  double capture_threshold = 0.7;
  double capture_window_ms = 100.0;
};

/// 1D monodomain cable with no-flux ends: semi-implicit operator
/// splitting (backward-Euler diffusion, forward-Euler reaction).
class StripSimulator {
 public:
  StripSimulator(const EPParams& params, StripConfig config = {})
      : cfg_(config), raw_(to_raw(params)) {
    n_ = static_cast<int>(std::lround(cfg_.length_mm / cfg_.dx_mm)) + 1;
    vm_ = Eigen::ArrayXd::Zero(n_);
    h_ = Eigen::ArrayXd::Ones(n_);
    n_stim_ = std::max(1, static_cast<int>(std::lround(cfg_.stim_extent_mm /
                                                       cfg_.dx_mm)));
    probe_ = n_ / 2;
    time_ = 0.0;
  }

  struct Snapshot {
    Eigen::ArrayXd vm, h;
    double time;
  };
  Snapshot save() const { return {vm_, h_, time_}; }
  void restore(const Snapshot& s) {
    vm_ = s.vm;
    h_ = s.h;
    time_ = s.time;
  }

  double time() const { return time_; }
  int probe_node() const { return probe_; }
  int n_nodes() const { return n_; }
  double vm_at(int node) const { return vm_[node]; }

  /// Advance to `t_end`. Stimuli are (onset_ms, amplitude) pairs applied
  /// to the first nodes for stim_duration_ms. Records the probe trace
  /// and upward capture_threshold crossings at recorded nodes.
  void run_until(double t_end,
                 const std::vector<std::pair<double, double>>& stims,
                 ActionPotentialTrace* trace = nullptr,
                 const std::vector<int>& watch_nodes = {},
                 std::map<int, std::vector<double>>* crossings = nullptr) {
    const double dt = cfg_.dt_diffusion_ms;
    const double dt_ion = dt / cfg_.ionic_substeps;
    const double alpha = raw_.diffusivity * dt / (cfg_.dx_mm * cfg_.dx_mm);
    std::vector<double> prev_watch(watch_nodes.size());
    while (time_ < t_end - 1e-9) {
      for (size_t w = 0; w < watch_nodes.size(); ++w)
        prev_watch[w] = vm_[watch_nodes[w]];
      // reaction substeps
      for (int s = 0; s < cfg_.ionic_substeps; ++s) {
        const double t_sub = time_ + s * dt_ion;
        double j = 0.0;
        for (const auto& [onset, amp] : stims)
          if (t_sub >= onset - 1e-9 && t_sub < onset + cfg_.stim_duration_ms)
            j += amp;
        step_reaction(dt_ion, j);
      }
      diffuse(alpha);
      require(vm_.allFinite(), "numerical blow-up in strip simulation");
      time_ += dt;
      if (trace) {
        trace->time_ms.push_back(time_);
        trace->vm.push_back(vm_[probe_]);
      }
      if (crossings) {
        for (size_t w = 0; w < watch_nodes.size(); ++w) {
          const double a = prev_watch[w], b = vm_[watch_nodes[w]];
          const double thr = cfg_.capture_threshold;
          if (a < thr && b >= thr) {
            const double frac = (thr - a) / (b - a);
            (*crossings)[watch_nodes[w]].push_back(time_ - dt + frac * dt);
          }
        }
      }
    }
  }

  const StripConfig& config() const { return cfg_; }
  const MMSRawParams& raw() const { return raw_; }

 private:
  void step_reaction(double dt, double j_stim) {
    for (int i = 0; i < n_; ++i) {
      const double j = (j_stim != 0.0 && i < n_stim_) ? j_stim : 0.0;
      const double v = vm_[i], hh = h_[i];
      vm_[i] += dt * (hh * v * (v - raw_.v_gate) * (1.0 - v) / raw_.tau_in -
                      (1.0 - hh) * v / raw_.tau_out + j);
      h_[i] += dt * ((v <= raw_.v_gate) ? (1.0 - hh) / raw_.tau_open
                                        : -hh / raw_.tau_close);
    }
  }

  // backward-Euler diffusion with no-flux ends (Thomas algorithm)
  void diffuse(double alpha) {
    static thread_local std::vector<double> c_prime, d_prime;
    c_prime.assign(n_, 0.0);
    d_prime.assign(n_, 0.0);
    // tridiagonal system: -alpha v_{i-1} + (1+2alpha) v_i - alpha v_{i+1}
    // with mirrored ends (1+alpha on the diagonal)
    auto diag = [&](int i) {
      return (i == 0 || i == n_ - 1) ? 1.0 + alpha : 1.0 + 2.0 * alpha;
    };
    c_prime[0] = -alpha / diag(0);
    d_prime[0] = vm_[0] / diag(0);
    for (int i = 1; i < n_; ++i) {
      const double m = diag(i) - (-alpha) * c_prime[i - 1];
      c_prime[i] = -alpha / m;
      d_prime[i] = (vm_[i] - (-alpha) * d_prime[i - 1]) / m;
    }
    vm_[n_ - 1] = d_prime[n_ - 1];
    for (int i = n_ - 2; i >= 0; --i)
      vm_[i] = d_prime[i] - c_prime[i] * vm_[i + 1];
  }

  StripConfig cfg_;
  MMSRawParams raw_;
  int n_ = 0, n_stim_ = 1, probe_ = 0;
  double time_ = 0.0;
  Eigen::ArrayXd vm_, h_;
};

/// Upper bound on the rested transit time from the stimulated end to the
/// probe: slowest valid CV (0.1 mm/ms) halved again for the slowdown of
/// coarse spatial discretization. The capture window for premature beats
/// is extended by the *measured* rested transit so that it classifies
/// refractoriness rather than conduction distance.
inline double rest_transit_allowance(const StripConfig& cfg) {
  return (0.5 * cfg.length_mm) / (0.5 * EPParams::kCvMin);
}

/// Smallest stimulus amplitude that captures a resting cable (any probe
/// upstroke within the rested transit allowance), bracketed by bisection.
inline double capture_threshold_amplitude(const EPParams& params,
                                          StripConfig cfg = {}) {
  auto captures = [&](double amp) {
    StripSimulator sim(params, cfg);
    std::map<int, std::vector<double>> crossings;
    sim.run_until(rest_transit_allowance(cfg) + cfg.stim_duration_ms,
                  {{0.0, amp}}, nullptr, {sim.probe_node()}, &crossings);
    return !crossings[sim.probe_node()].empty();
  };
  double lo = 0.0, hi = 0.05;
  while (!captures(hi)) {
    hi *= 2.0;
    // physiological thresholds are O(0.1); far above that the wave either
    // pins on the grid or is too slow to reach the probe in the window,
    // and huge stimuli destabilize the explicit ionic step
    require(hi <= 12.8, "no stimulus amplitude captures this cable");
  }
  for (int it = 0; it < 12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (captures(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Default working amplitude: twice the capture threshold at rest.
inline double default_stim_amplitude(const EPParams& params,
                                     StripConfig cfg = {}) {
  return 2.0 * capture_threshold_amplitude(params, cfg);
}

struct StripResult {
  ActionPotentialTrace trace;       // probe (midpoint) trace
  std::vector<bool> captured;       // per stimulus
  std::vector<double> upstrokes_ms; // probe upstroke times
};

/// Run a full stimulus schedule from rest and report per-stimulus capture
/// (probe upstroke within the capture window after each onset).
inline StripResult simulate_strip(const EPParams& params,
                                  const std::vector<double>& stim_times,
                                  double duration_ms,
                                  std::optional<double> amplitude = {},
                                  StripConfig cfg = {}) {
  for (size_t i = 1; i < stim_times.size(); ++i)
    require(stim_times[i] > stim_times[i - 1], "stim times must increase");
  const double amp = amplitude ? *amplitude : default_stim_amplitude(params, cfg);
  StripSimulator sim(params, cfg);
  std::vector<std::pair<double, double>> stims;
  for (double t : stim_times) stims.emplace_back(t, amp);
  StripResult res;
  std::map<int, std::vector<double>> crossings;
  sim.run_until(duration_ms, stims, &res.trace, {sim.probe_node()},
                &crossings);
  res.upstrokes_ms = crossings[sim.probe_node()];
  // the capture window is anchored at the rested transit time (first beat
  // from rest), so slow cables are not misclassified by conduction delay
  const double transit =
      res.upstrokes_ms.empty()
          ? rest_transit_allowance(cfg)
          : res.upstrokes_ms.front() - stim_times.front();
  // each probe upstroke is credited to at most one stimulus, in order, so
  // a premature stimulus cannot claim the wavefront of the previous beat
  size_t next = 0;
  for (double t : stim_times) {
    while (next < res.upstrokes_ms.size() && res.upstrokes_ms[next] < t)
      ++next;
    const bool cap =
        next < res.upstrokes_ms.size() &&
        res.upstrokes_ms[next] <= t + transit + cfg.capture_window_ms;
    res.captured.push_back(cap);
    if (cap) ++next;
  }
  return res;
}

/// Continuous ERP by bisection on the final coupling interval of the
/// pacing protocol; returns the midpoint of the final capture/no-capture
/// bracket. Throws if the S2 beat of an S1S2S3 protocol does not capture.
inline double measure_erp(const EPParams& params, const PacingProtocol& proto,
                          double precision_ms = 1.0, StripConfig cfg = {},
                          std::optional<double> amplitude = {}) {
  proto.validate();
  require(precision_ms >= 0.5, "precision must be >= 0.5 ms");
  const double amp =
      amplitude ? *amplitude : default_stim_amplitude(params, cfg);

  // Run the S1 train up to (not including) the last S1 stimulus, snapshot,
  // then replay the last beat plus premature beats per bisection trial.
  StripSimulator sim(params, cfg);
  const double t_last_s1 = (proto.n_s1_beats - 1) * proto.s1_ms;
  std::vector<std::pair<double, double>> train;
  for (int b = 0; b + 1 < proto.n_s1_beats; ++b)
    train.emplace_back(b * proto.s1_ms, amp);
  std::map<int, std::vector<double>> train_crossings;
  sim.run_until(t_last_s1, train, nullptr, {sim.probe_node()},
                &train_crossings);
  require(!train_crossings[sim.probe_node()].empty(),
          "S1 train failed to capture the cable");
  // rested transit time anchors the capture window, so slow cables are
  // classified by refractoriness rather than conduction distance
  const double transit = train_crossings[sim.probe_node()].front();
  const double window = transit + cfg.capture_window_ms;
  const auto snap = sim.save();
  const bool s3_mode = proto.kind == PacingProtocol::Kind::S1S2S3;
  const double t_s2 = t_last_s1 + proto.s2_ms;

  // sequential attribution: each upstroke is credited to at most one
  // stimulus, so the premature window cannot claim an earlier wavefront
  auto last_captured = [&](const std::vector<double>& onsets,
                           const std::vector<double>& ups) {
    size_t next = 0;
    bool cap = false;
    for (double t : onsets) {
      while (next < ups.size() && ups[next] < t) ++next;
      cap = next < ups.size() && ups[next] <= t + window;
      if (cap) ++next;
    }
    return cap;
  };

  auto test_capture = [&](double coupling) {
    sim.restore(snap);
    std::vector<std::pair<double, double>> stims{{t_last_s1, amp}};
    double premature_onset;
    if (s3_mode) {
      stims.emplace_back(t_s2, amp);
      premature_onset = t_s2 + coupling;
    } else {
      premature_onset = t_last_s1 + coupling;
    }
    stims.emplace_back(premature_onset, amp);
    std::map<int, std::vector<double>> crossings;
    sim.run_until(premature_onset + window + 2.0, stims, nullptr,
                  {sim.probe_node()}, &crossings);
    std::vector<double> onsets{t_last_s1};
    if (s3_mode) onsets.push_back(t_s2);
    onsets.push_back(premature_onset);
    return last_captured(onsets, crossings[sim.probe_node()]);
  };

  if (s3_mode) {
    // the S2 beat itself must capture
    sim.restore(snap);
    std::map<int, std::vector<double>> crossings;
    sim.run_until(t_s2 + window + 2.0, {{t_last_s1, amp}, {t_s2, amp}},
                  nullptr, {sim.probe_node()}, &crossings);
    require(last_captured({t_last_s1, t_s2}, crossings[sim.probe_node()]),
            "S2 beat failed to capture in S1S2S3 protocol");
  }

  double lo = proto.scan_lo_ms, hi = proto.scan_hi_ms;
  require(test_capture(hi), "no capture at the scan upper bound");
  if (test_capture(lo)) return lo;  // ERP at or below the scan floor
  while (hi - lo > precision_ms) {
    const double mid = 0.5 * (lo + hi);
    (test_capture(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// APD at the requested repolarization percentages for the final beat of
/// a trace. Activation is the last upward 0.7 crossing; recovery uses the
/// matching downward threshold (20 -> 0.8, 30 -> 0.7, 50 -> 0.5,
/// 90 -> 0.1) with linear interpolation between samples.
inline std::map<int, double> measure_apd(const ActionPotentialTrace& trace,
                                         const std::vector<int>& levels) {
  static const std::map<int, double> kThresholds = {
      {20, 0.8}, {30, 0.7}, {50, 0.5}, {90, 0.1}};
  require(trace.time_ms.size() == trace.vm.size() && trace.vm.size() >= 2,
          "trace too short");
  // last upward 0.7 crossing
  double activation = -1.0;
  for (size_t i = 1; i < trace.vm.size(); ++i) {
    if (trace.vm[i - 1] < 0.7 && trace.vm[i] >= 0.7) {
      const double f = (0.7 - trace.vm[i - 1]) / (trace.vm[i] - trace.vm[i - 1]);
      activation =
          trace.time_ms[i - 1] + f * (trace.time_ms[i] - trace.time_ms[i - 1]);
    }
  }
  require(activation >= 0, "trace contains no upstroke crossing 0.7");

  std::map<int, double> out;
  for (int level : levels) {
    auto it = kThresholds.find(level);
    require(it != kThresholds.end(),
            "unsupported APD level " + std::to_string(level));
    const double thr = it->second;
    double recovery = -1.0;
    for (size_t i = 1; i < trace.vm.size(); ++i) {
      if (trace.time_ms[i] <= activation) continue;
      if (trace.vm[i - 1] > thr && trace.vm[i] <= thr) {
        const double f =
            (trace.vm[i - 1] - thr) / (trace.vm[i - 1] - trace.vm[i]);
        recovery =
            trace.time_ms[i - 1] + f * (trace.time_ms[i] - trace.time_ms[i - 1]);
        break;
      }
    }
    require(recovery >= 0,
            "level " + std::to_string(level) + " never crossed after upstroke");
    out[level] = recovery - activation;
  }
  return out;
}

/// Zero-dimensional (single cell) action potential under pacing; used for
/// APD_max checks where diffusion is irrelevant.
inline ActionPotentialTrace simulate_single_cell(const EPParams& params,
                                                 const std::vector<double>& stim_times =
                                                     {10.0, 610.0, 1210.0, 1810.0},
                                                 double duration_ms = 2400.0,
                                                 double amplitude = 0.5,
                                                 double dt = 0.02,
                                                 double stim_duration_ms = 2.0) {
  const MMSRawParams raw = to_raw(params);
  CellState s;
  ActionPotentialTrace trace;
  const int steps = static_cast<int>(duration_ms / dt);
  trace.time_ms.reserve(steps / 5);
  for (int i = 0; i < steps; ++i) {
    const double t = i * dt;
    double j = 0.0;
    for (double onset : stim_times)
      if (t >= onset && t < onset + stim_duration_ms) j += amplitude;
    s = step_cell(s, raw, j, dt);
    if (i % 5 == 0) {
      trace.time_ms.push_back(t + dt);
      trace.vm.push_back(s.vm);
    }
  }
  return trace;
}

/// Conduction velocity (mm/ms) between cable quarter points on the final
/// beat of an S1 train.
inline double measure_cv(const EPParams& params, int n_beats = 2,
                         double s1_ms = 600.0, StripConfig cfg = {},
                         std::optional<double> amplitude = {}) {
  const double amp =
      amplitude ? *amplitude : default_stim_amplitude(params, cfg);
  StripSimulator sim(params, cfg);
  const int q1 = sim.n_nodes() / 4;
  const int q3 = 3 * sim.n_nodes() / 4;
  std::vector<std::pair<double, double>> stims;
  for (int b = 0; b < n_beats; ++b) stims.emplace_back(b * s1_ms, amp);
  std::map<int, std::vector<double>> crossings;
  sim.run_until((n_beats - 1) * s1_ms + 200.0, stims, nullptr, {q1, q3},
                &crossings);
  require(!crossings[q1].empty() && !crossings[q3].empty(),
          "wave did not traverse the cable");
  const double t1 = crossings[q1].back();
  const double t3 = crossings[q3].back();
  require(t3 > t1, "activation order inverted between quarter points");
  return (q3 - q1) * cfg.dx_mm / (t3 - t1);
}

}  // namespace epcal
