#pragma once

#include <cmath>

#include "epcal/common.hpp"

namespace epcal {

/// Raw modified Mitchell-Schaeffer cell parameters plus diffusivity.
struct MMSRawParams {
  double tau_in = 0.3;     // ms
  double tau_out = 6.0;    // ms
  double tau_open = 120.0; // ms
  double tau_close = 150.0;// ms
  double diffusivity = 0.1;// mm^2/ms
  double v_gate = 0.1;

  void validate() const {
    require(tau_in > 0 && tau_out > 0 && tau_open > 0 && tau_close > 0,
            "time constants must be positive");
    require(diffusivity > 0, "diffusivity must be positive");
    require(v_gate > 0 && v_gate < 0.5, "v_gate must be in (0, 0.5)");
  }
};

/// Transformed parameters: conduction velocity and action-potential
/// duration replace diffusivity and tau_close, so convex combinations of
/// valid parameters stay valid.
struct EPParams {
  double cv_max = 0.7;     // m/s (numerically equal to mm/ms)
  double tau_in = 0.05;    // ms
  double tau_out = 6.0;    // ms
  double tau_open = 120.0; // ms
  double apd_max = 180.0;  // ms

  static constexpr double kCvMin = 0.1, kCvMax = 1.5;
  static constexpr double kTauInMin = 0.01, kTauInMax = 0.30;
  static constexpr double kTauOutMin = 1.0, kTauOutMax = 30.0;
  static constexpr double kTauOpenMin = 65.0, kTauOpenMax = 215.0;
  static constexpr double kApdMin = 120.0, kApdMax = 270.0;

  void validate() const {
    require(cv_max >= kCvMin && cv_max <= kCvMax, "cv_max out of range");
    require(tau_in >= kTauInMin && tau_in <= kTauInMax, "tau_in out of range");
    require(tau_out >= kTauOutMin && tau_out <= kTauOutMax,
            "tau_out out of range");
    require(tau_open >= kTauOpenMin && tau_open <= kTauOpenMax,
            "tau_open out of range");
    require(apd_max >= kApdMin && apd_max <= kApdMax, "apd_max out of range");
  }
};

constexpr double kVGate = 0.1;

/// CV_max = 0.5 (1 - 2 v_gate) sqrt(2 D / tau_in), inverted for D, with
/// CV in mm/ms. APD_max = tau_close log(1 + tau_out (1-v_gate)^2 /
/// (4 tau_in)), inverted for tau_close.
inline MMSRawParams to_raw(const EPParams& p) {
  p.validate();
  MMSRawParams raw;
  raw.v_gate = kVGate;
  raw.tau_in = p.tau_in;
  raw.tau_out = p.tau_out;
  raw.tau_open = p.tau_open;
  const double cv_mm_ms = p.cv_max;  // 1 m/s == 1 mm/ms
  const double half = 0.5 * (1.0 - 2.0 * kVGate);
  raw.diffusivity = p.tau_in * (cv_mm_ms / half) * (cv_mm_ms / half) / 2.0;
  const double log_arg =
      1.0 + p.tau_out * (1.0 - kVGate) * (1.0 - kVGate) / (4.0 * p.tau_in);
  require(std::log(log_arg) > 1e-12, "apd transform singular: log arg ~ 1");
  raw.tau_close = p.apd_max / std::log(log_arg);
  raw.validate();
  return raw;
}

inline EPParams from_raw(const MMSRawParams& raw) {
  raw.validate();
  EPParams p;
  p.tau_in = raw.tau_in;
  p.tau_out = raw.tau_out;
  p.tau_open = raw.tau_open;
  const double half = 0.5 * (1.0 - 2.0 * raw.v_gate);
  p.cv_max = half * std::sqrt(2.0 * raw.diffusivity / raw.tau_in);
  const double log_arg = 1.0 + raw.tau_out * (1.0 - raw.v_gate) *
                                   (1.0 - raw.v_gate) / (4.0 * raw.tau_in);
  p.apd_max = raw.tau_close * std::log(log_arg);
  return p;
}

/// Cell state: normalized membrane voltage and recovery gate.
struct CellState {
  double vm = 0.0;
  double h = 1.0;
};

/// One forward-Euler step of the reaction terms (no diffusion):
///   dVm/dt = h Vm (Vm - v_gate)(1 - Vm)/tau_in - (1-h) Vm/tau_out + J_stim
///   dh/dt  = (1-h)/tau_open  if Vm <= v_gate,  else -h/tau_close
inline CellState step_cell(const CellState& s, const MMSRawParams& raw,
                           double j_stim, double dt) {
  require(dt > 0, "dt must be positive");
  require(std::isfinite(s.vm) && std::isfinite(s.h), "non-finite cell state");
  const double dvm =
      s.h * s.vm * (s.vm - raw.v_gate) * (1.0 - s.vm) / raw.tau_in -
      (1.0 - s.h) * s.vm / raw.tau_out + j_stim;
  const double dh = (s.vm <= raw.v_gate) ? (1.0 - s.h) / raw.tau_open
                                         : -s.h / raw.tau_close;
  return {s.vm + dt * dvm, s.h + dt * dh};
}

}  // namespace epcal
