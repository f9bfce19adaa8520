#pragma once

#include <Eigen/Dense>
#include <vector>

#include "epcal/common.hpp"

namespace epcal {

namespace detail {

/// Clamped cubic B-spline basis with `n_basis` functions on [lo, hi],
/// evaluated at x (Cox-de Boor).
inline Eigen::VectorXd bspline_basis(double x, double lo, double hi,
                                     int n_basis) {
  const int degree = 3;
  const int n_knots = n_basis + degree + 1;
  std::vector<double> knots(n_knots);
  const int n_interior = n_basis - degree - 1;
  for (int i = 0; i <= degree; ++i) knots[i] = lo;
  for (int i = 0; i < n_interior; ++i)
    knots[degree + 1 + i] = lo + (hi - lo) * (i + 1) / (n_interior + 1);
  for (int i = 0; i <= degree; ++i) knots[n_knots - 1 - i] = hi;

  const double xc = std::min(std::max(x, lo), hi);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_basis);
  // degree-0 seeds
  std::vector<double> work(n_knots - 1, 0.0);
  for (int i = 0; i < n_knots - 1; ++i) {
    const bool last_span =
        knots[i] < hi && knots[i + 1] >= hi && xc >= hi - 1e-300;
    if ((xc >= knots[i] && xc < knots[i + 1]) || last_span) work[i] = 1.0;
  }
  // ensure exactly the rightmost nonempty span owns x == hi
  if (xc >= hi) {
    std::fill(work.begin(), work.end(), 0.0);
    for (int i = n_knots - 2; i >= 0; --i)
      if (knots[i] < knots[i + 1]) {
        work[i] = 1.0;
        break;
      }
  }
  for (int d = 1; d <= degree; ++d) {
    for (int i = 0; i + d < n_knots - 1; ++i) {
      double left = 0.0, right = 0.0;
      if (knots[i + d] > knots[i])
        left = (xc - knots[i]) / (knots[i + d] - knots[i]) * work[i];
      if (knots[i + d + 1] > knots[i + 1])
        right = (knots[i + d + 1] - xc) / (knots[i + d + 1] - knots[i + 1]) *
                work[i + 1];
      work[i] = left + right;
    }
  }
  for (int i = 0; i < n_basis; ++i) b[i] = work[i];
  return b;
}

}  // namespace detail

/// Univariate penalized B-spline smoother (P-spline): cubic basis,
/// second-order difference penalty, smoothing parameter chosen by
/// generalized cross-validation over a log-spaced grid.
struct SplineSmoother {
  double lo = 0, hi = 1;
  int n_basis = 10;
  Eigen::VectorXd coeff;
  double gcv_lambda = 0;

  double predict(double x) const {
    return detail::bspline_basis(x, lo, hi, n_basis).dot(coeff);
  }
};

inline SplineSmoother fit_spline_smoother(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& y,
                                          int n_basis = 10) {
  const int n = static_cast<int>(x.size());
  require(n == y.size() && n >= n_basis, "smoother needs n >= n_basis points");
  SplineSmoother sm;
  sm.n_basis = n_basis;
  sm.lo = x.minCoeff();
  sm.hi = x.maxCoeff();
  require(sm.hi > sm.lo, "degenerate (constant) input column");

  Eigen::MatrixXd X(n, n_basis);
  for (int i = 0; i < n; ++i)
    X.row(i) = detail::bspline_basis(x[i], sm.lo, sm.hi, n_basis).transpose();

  // second-order difference penalty
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n_basis - 2, n_basis);
  for (int i = 0; i < n_basis - 2; ++i) {
    D(i, i) = 1;
    D(i, i + 1) = -2;
    D(i, i + 2) = 1;
  }
  const Eigen::MatrixXd P = D.transpose() * D;
  const Eigen::MatrixXd XtX = X.transpose() * X;
  const Eigen::VectorXd Xty = X.transpose() * y;

  double best_gcv = std::numeric_limits<double>::infinity();
  for (int g = 0; g < 25; ++g) {
    const double lam = std::pow(10.0, -4.0 + 8.0 * g / 24.0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX + lam * P);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::VectorXd beta = ldlt.solve(Xty);
    const double trace_h = ldlt.solve(XtX).trace();
    const double rss = (y - X * beta).squaredNorm();
    const double denom = n - trace_h;
    if (denom <= 0) continue;
    const double gcv = n * rss / (denom * denom);
    if (gcv < best_gcv) {
      best_gcv = gcv;
      sm.coeff = beta;
      sm.gcv_lambda = lam;
    }
  }
  require(sm.coeff.size() == n_basis, "spline smoother fit failed");
  return sm;
}

/// Variance-based sensitivity index of output y on one input column:
/// variance of the smoother's predictions at the input points divided by
/// the variance of y. Bounded to [0, 1].
inline double sensitivity_index(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y) {
  require(x.size() >= 50, "need at least 50 points");
  const double y_var = (y.array() - y.mean()).square().mean();
  require(y_var > 0, "output variance is zero");
  const SplineSmoother sm = fit_spline_smoother(x, y);
  Eigen::VectorXd pred(x.size());
  for (int i = 0; i < x.size(); ++i) pred[i] = sm.predict(x[i]);
  const double p_var = (pred.array() - pred.mean()).square().mean();
  return std::min(1.0, p_var / y_var);
}

/// Indices for every column of a design matrix against one output.
inline std::vector<double> sensitivity_indices(const Eigen::MatrixXd& inputs,
                                               const Eigen::VectorXd& output) {
  std::vector<double> out;
  out.reserve(inputs.cols());
  for (int j = 0; j < inputs.cols(); ++j)
    out.push_back(sensitivity_index(inputs.col(j), output));
  return out;
}

}  // namespace epcal
