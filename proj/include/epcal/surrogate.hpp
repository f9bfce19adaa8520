#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <optional>
#include <vector>

#include "epcal/lhs.hpp"
#include "epcal/strip.hpp"

namespace epcal {

/// One row of the ERP training table.
struct ErpRow {
  double cv_max, tau_in, tau_out, tau_open, apd_max;
  std::optional<double> erp_s2;
  std::optional<double> erp_s3;
  std::string note;  // failure note, empty on success
};

using ErpTable = std::vector<ErpRow>;

/// Run strip-simulation ERP measurements over a design of
/// (cv_max, tau_out, apd_max), with tau_in and tau_open fixed.
/// S2 scans follow an S1S2 protocol, S3 scans S1S2S3. Failures are
/// recorded per row rather than thrown.
inline ErpRow measure_erp_row(const EPParams& p, double precision_ms = 1.0,
                              const PacingProtocol& s2_proto =
                                  {PacingProtocol::Kind::S1S2},
                              const PacingProtocol& s3_proto =
                                  {PacingProtocol::Kind::S1S2S3}) {
  ErpRow row{p.cv_max, p.tau_in, p.tau_out, p.tau_open, p.apd_max,
             std::nullopt, std::nullopt, ""};
  try {
    const double amp = default_stim_amplitude(p);
    row.erp_s2 = measure_erp(p, s2_proto, precision_ms, {}, amp);
    try {
      row.erp_s3 = measure_erp(p, s3_proto, precision_ms, {}, amp);
    } catch (const Error& e) {
      row.note = e.what();  // e.g. S2 beat failed to capture
    }
  } catch (const Error& e) {
    row.note = e.what();
  }
  return row;
}

inline ErpTable build_training_set(const LHSDesign& design,
                                   double tau_in = 0.05,
                                   double tau_open = 120.0,
                                   double precision_ms = 1.0,
                                   const PacingProtocol& s2_proto =
                                       {PacingProtocol::Kind::S1S2},
                                   const PacingProtocol& s3_proto =
                                       {PacingProtocol::Kind::S1S2S3}) {
  require(design.dim() == 3, "design must cover cv_max, tau_out, apd_max");
  ErpTable table;
  table.reserve(design.n());
  for (int i = 0; i < design.n(); ++i) {
    EPParams p;
    p.cv_max = design.points(i, 0);
    p.tau_out = design.points(i, 1);
    p.apd_max = design.points(i, 2);
    p.tau_in = tau_in;
    p.tau_open = tau_open;
    table.push_back(measure_erp_row(p, precision_ms, s2_proto, s3_proto));
  }
  return table;
}

/// Training set over all five parameters (sensitivity-analysis design).
inline ErpTable build_training_set_full(const LHSDesign& design,
                                        double precision_ms = 1.0) {
  require(design.dim() == 5,
          "design must cover cv_max, tau_in, tau_out, tau_open, apd_max");
  ErpTable table;
  table.reserve(design.n());
  for (int i = 0; i < design.n(); ++i) {
    EPParams p;
    p.cv_max = design.points(i, 0);
    p.tau_in = design.points(i, 1);
    p.tau_out = design.points(i, 2);
    p.tau_open = design.points(i, 3);
    p.apd_max = design.points(i, 4);
    table.push_back(measure_erp_row(p, precision_ms));
  }
  return table;
}

/// Bivariate cubic polynomial surrogates for ERP_S2 (f1) and ERP_S3 (f2)
/// as functions of (tau_out, apd_max), fitted on standardized inputs.
/// Basis: {1, t, a, t^2, ta, a^2, t^3, t^2 a, t a^2, a^3}.
struct SurrogateModel {
  Eigen::VectorXd coeff_s2;  // 10
  Eigen::VectorXd coeff_s3;  // 10
  double center_tau_out = 0, scale_tau_out = 1;
  double center_apd = 0, scale_apd = 1;
  double cutoff_ms = 280.0;
  double rms_s2 = 0, rms_s3 = 0;
  double tau_out_lo = 0, tau_out_hi = 0, apd_lo = 0, apd_hi = 0;  // training box

  struct Eval {
    double erp_s2, erp_s3;
    bool valid;        // predicted ERP_S2 <= cutoff
    bool extrapolated; // inputs outside training box
    // partials w.r.t. (tau_out, apd_max) in natural units
    Eigen::Vector2d grad_s2, grad_s3;
    Eigen::Matrix2d hess_s2, hess_s3;
  };

  static Eigen::VectorXd basis(double t, double a) {
    Eigen::VectorXd b(10);
    b << 1, t, a, t * t, t * a, a * a, t * t * t, t * t * a, t * a * a,
        a * a * a;
    return b;
  }
  static Eigen::VectorXd basis_dt(double t, double a) {
    Eigen::VectorXd b(10);
    b << 0, 1, 0, 2 * t, a, 0, 3 * t * t, 2 * t * a, a * a, 0;
    return b;
  }
  static Eigen::VectorXd basis_da(double t, double a) {
    Eigen::VectorXd b(10);
    b << 0, 0, 1, 0, t, 2 * a, 0, t * t, 2 * t * a, 3 * a * a;
    return b;
  }
  static Eigen::VectorXd basis_dtt(double t, double a) {
    Eigen::VectorXd b(10);
    b << 0, 0, 0, 2, 0, 0, 6 * t, 2 * a, 0, 0;
    return b;
  }
  static Eigen::VectorXd basis_dta(double t, double a) {
    Eigen::VectorXd b(10);
    b << 0, 0, 0, 0, 1, 0, 0, 2 * t, 2 * a, 0;
    return b;
  }
  static Eigen::VectorXd basis_daa(double t, double a) {
    Eigen::VectorXd b(10);
    b << 0, 0, 0, 0, 0, 2, 0, 0, 2 * t, 6 * a;
    return b;
  }

  Eval evaluate(double tau_out, double apd_max) const {
    const double t = (tau_out - center_tau_out) / scale_tau_out;
    const double a = (apd_max - center_apd) / scale_apd;
    Eval e;
    const auto b = basis(t, a);
    e.erp_s2 = coeff_s2.dot(b);
    e.erp_s3 = coeff_s3.dot(b);
    e.valid = e.erp_s2 <= cutoff_ms;
    e.extrapolated = tau_out < tau_out_lo || tau_out > tau_out_hi ||
                     apd_max < apd_lo || apd_max > apd_hi;
    const auto bt = basis_dt(t, a), ba = basis_da(t, a);
    e.grad_s2 << coeff_s2.dot(bt) / scale_tau_out, coeff_s2.dot(ba) / scale_apd;
    e.grad_s3 << coeff_s3.dot(bt) / scale_tau_out, coeff_s3.dot(ba) / scale_apd;
    const auto btt = basis_dtt(t, a), bta = basis_dta(t, a), baa = basis_daa(t, a);
    const double s_t = scale_tau_out, s_a = scale_apd;
    e.hess_s2 << coeff_s2.dot(btt) / (s_t * s_t), coeff_s2.dot(bta) / (s_t * s_a),
        coeff_s2.dot(bta) / (s_t * s_a), coeff_s2.dot(baa) / (s_a * s_a);
    e.hess_s3 << coeff_s3.dot(btt) / (s_t * s_t), coeff_s3.dot(bta) / (s_t * s_a),
        coeff_s3.dot(bta) / (s_t * s_a), coeff_s3.dot(baa) / (s_a * s_a);
    return e;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), "cannot write " + path);
    out.precision(17);
    out << "epcal-surrogate v1\n";
    out << "cutoff_ms " << cutoff_ms << "\n";
    out << "center " << center_tau_out << " " << center_apd << "\n";
    out << "scale " << scale_tau_out << " " << scale_apd << "\n";
    out << "box " << tau_out_lo << " " << tau_out_hi << " " << apd_lo << " "
        << apd_hi << "\n";
    out << "rms " << rms_s2 << " " << rms_s3 << "\n";
    out << "coeff_s2";
    for (int i = 0; i < 10; ++i) out << " " << coeff_s2[i];
    out << "\ncoeff_s3";
    for (int i = 0; i < 10; ++i) out << " " << coeff_s3[i];
    out << "\n";
  }

  static SurrogateModel load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path);
    std::string header;
    std::getline(in, header);
    require(header == "epcal-surrogate v1", "unsupported surrogate file");
    SurrogateModel m;
    m.coeff_s2.resize(10);
    m.coeff_s3.resize(10);
    std::string key;
    while (in >> key) {
      if (key == "cutoff_ms") in >> m.cutoff_ms;
      else if (key == "center") in >> m.center_tau_out >> m.center_apd;
      else if (key == "scale") in >> m.scale_tau_out >> m.scale_apd;
      else if (key == "box")
        in >> m.tau_out_lo >> m.tau_out_hi >> m.apd_lo >> m.apd_hi;
      else if (key == "rms") in >> m.rms_s2 >> m.rms_s3;
      else if (key == "coeff_s2")
        for (int i = 0; i < 10; ++i) in >> m.coeff_s2[i];
      else if (key == "coeff_s3")
        for (int i = 0; i < 10; ++i) in >> m.coeff_s3[i];
      else throw Error("unknown surrogate field: " + key);
    }
    return m;
  }
};

/// Ordinary least squares of the bivariate cubic on rows with
/// ERP_S2 <= cutoff (per target; missing values excluded per target).
inline SurrogateModel fit_surrogates(const ErpTable& table,
                                     double cutoff_ms = 280.0) {
  SurrogateModel m;
  m.cutoff_ms = cutoff_ms;

  std::vector<const ErpRow*> kept;
  for (const auto& row : table)
    if (row.erp_s2 && *row.erp_s2 <= cutoff_ms) kept.push_back(&row);
  require(static_cast<int>(kept.size()) >= 10,
          "need at least 10 rows below the cutoff to fit 10 coefficients");

  double mean_t = 0, mean_a = 0;
  for (const auto* r : kept) {
    mean_t += r->tau_out;
    mean_a += r->apd_max;
  }
  mean_t /= kept.size();
  mean_a /= kept.size();
  double sd_t = 0, sd_a = 0;
  for (const auto* r : kept) {
    sd_t += (r->tau_out - mean_t) * (r->tau_out - mean_t);
    sd_a += (r->apd_max - mean_a) * (r->apd_max - mean_a);
  }
  sd_t = std::sqrt(sd_t / kept.size());
  sd_a = std::sqrt(sd_a / kept.size());
  require(sd_t > 1e-12 && sd_a > 1e-12, "degenerate (collinear) inputs");
  m.center_tau_out = mean_t;
  m.scale_tau_out = sd_t;
  m.center_apd = mean_a;
  m.scale_apd = sd_a;
  m.tau_out_lo = m.tau_out_hi = kept[0]->tau_out;
  m.apd_lo = m.apd_hi = kept[0]->apd_max;
  for (const auto* r : kept) {
    m.tau_out_lo = std::min(m.tau_out_lo, r->tau_out);
    m.tau_out_hi = std::max(m.tau_out_hi, r->tau_out);
    m.apd_lo = std::min(m.apd_lo, r->apd_max);
    m.apd_hi = std::max(m.apd_hi, r->apd_max);
  }

  auto fit_target = [&](auto get, Eigen::VectorXd* coeff, double* rms) {
    std::vector<std::pair<Eigen::VectorXd, double>> rows;
    for (const auto* r : kept) {
      const auto y = get(*r);
      if (!y) continue;
      const double t = (r->tau_out - mean_t) / sd_t;
      const double a = (r->apd_max - mean_a) / sd_a;
      rows.emplace_back(SurrogateModel::basis(t, a), *y);
    }
    require(static_cast<int>(rows.size()) >= 10,
            "need at least 10 usable rows per target");
    Eigen::MatrixXd X(rows.size(), 10);
    Eigen::VectorXd y(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      X.row(i) = rows[i].first.transpose();
      y[i] = rows[i].second;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    require(svd.singularValues()(9) >
                1e-10 * svd.singularValues()(0),
            "rank-deficient design for cubic fit");
    *coeff = svd.solve(y);
    *rms = std::sqrt((X * *coeff - y).squaredNorm() / rows.size());
  };
  fit_target([](const ErpRow& r) { return r.erp_s2; }, &m.coeff_s2, &m.rms_s2);
  fit_target([](const ErpRow& r) { return r.erp_s3; }, &m.coeff_s3, &m.rms_s3);
  return m;
}

}  // namespace epcal
