#pragma once

#include <Eigen/Dense>

#include "epcal/mms.hpp"

namespace epcal {

/// Per-vertex EP parameter fields (same units as EPParams).
struct EPFields {
  Eigen::VectorXd cv_max;
  Eigen::VectorXd tau_in;
  Eigen::VectorXd tau_out;
  Eigen::VectorXd tau_open;
  Eigen::VectorXd apd_max;

  int n_vertices() const { return static_cast<int>(cv_max.size()); }

  static EPFields uniform(int n, const EPParams& p) {
    EPFields f;
    f.cv_max = Eigen::VectorXd::Constant(n, p.cv_max);
    f.tau_in = Eigen::VectorXd::Constant(n, p.tau_in);
    f.tau_out = Eigen::VectorXd::Constant(n, p.tau_out);
    f.tau_open = Eigen::VectorXd::Constant(n, p.tau_open);
    f.apd_max = Eigen::VectorXd::Constant(n, p.apd_max);
    return f;
  }

  EPParams at(int v) const {
    return {cv_max[v], tau_in[v], tau_out[v], tau_open[v], apd_max[v]};
  }

  void validate() const {
    require(tau_in.size() == cv_max.size() && tau_out.size() == cv_max.size() &&
                tau_open.size() == cv_max.size() &&
                apd_max.size() == cv_max.size(),
            "field length mismatch");
    for (int v = 0; v < n_vertices(); ++v) at(v).validate();
  }
};

}  // namespace epcal
