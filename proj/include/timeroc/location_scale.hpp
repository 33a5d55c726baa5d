#pragma once

// Location-scale marker model Y = mu(x) + sigma(x) eps, fitted stage-wise:
// a Gaussian additive model for the mean, a second one for the log squared
// residuals, then a least-squares scale factor. The residual distribution
// is left nonparametric (empirical CDF of the standardised residuals).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/gam.hpp"
#include "timeroc/terms.hpp"

namespace timeroc {

inline constexpr double kResidualFloor = 1e-150;

struct LocationScaleSpec {
  ModelSpec mean;
  ModelSpec logsq;
};

struct LocationScaleModel {
  FittedModel mean_model;
  FittedModel logsq_model;
  double gamma_hat = 0.0;
  Eigen::VectorXd step1_residuals;  // y - mu_hat, in input order
  Eigen::VectorXd residuals;        // standardised, sorted ascending
  Eigen::Index n = 0;

  Eigen::VectorXd mu(const Columns& x, ClampCounter* clamps = nullptr) const {
    return eta_of(mean_model, x, clamps);
  }

  Eigen::VectorXd sigma(const Columns& x, ClampCounter* clamps = nullptr) const {
    return (gamma_hat * eta_of(logsq_model, x, clamps).array().exp()).sqrt().matrix();
  }

  /// Mean and scale at a single covariate point.
  std::pair<double, double> at(const Columns& x, ClampCounter* clamps = nullptr) const {
    Columns one;
    for (const auto& [name, v] : x) one[name] = Eigen::VectorXd::Constant(1, v(0));
    return {mu(one, clamps)(0), sigma(one, clamps)(0)};
  }

 private:
  static Eigen::VectorXd eta_of(const FittedModel& m, const Columns& x, ClampCounter* clamps) {
    if (m.terms.variables().empty()) {
      const Eigen::Index rows = x.empty() ? 1 : x.begin()->second.size();
      return Eigen::VectorXd::Constant(rows, m.terms.intercept ? m.coefficients(0) : 0.0);
    }
    return predict_eta(m, x, clamps);
  }
};

/// Log squared residuals with tiny residuals floored, the stage-two response.
inline Eigen::VectorXd log_squared(const Eigen::VectorXd& r) {
  Eigen::VectorXd out(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double a = std::max(std::abs(r(i)), kResidualFloor);
    out(i) = std::log(a * a);
  }
  return out;
}

inline LocationScaleModel fit_location_scale(const Eigen::VectorXd& y, const Columns& x, const LocationScaleSpec& spec,
                                             const FitOptions& mean_options = {},
                                             const FitOptions& logsq_options = {}) {
  const Eigen::Index n = y.size();
  if (n < 10) throw Error(ErrorCode::invalid_input, "location-scale fit needs at least 10 observations");
  if (!y.allFinite()) throw Error(ErrorCode::invalid_input, "marker values must be finite");
  for (const auto& [name, col] : x)
    if (col.size() != n) throw Error(ErrorCode::invalid_input, "covariate '" + name + "' has wrong length");

  LocationScaleModel m;
  m.n = n;
  m.mean_model = fit(spec.mean, x, y, Family::gaussian_identity, mean_options);
  m.step1_residuals = y - m.mu(x);
  if ((m.step1_residuals.array().abs() < kResidualFloor).all())
    throw Error(ErrorCode::degenerate_variance, "all residuals are zero");

  m.logsq_model = fit(spec.logsq, x, log_squared(m.step1_residuals), Family::gaussian_identity, logsq_options);
  const Eigen::VectorXd w = m.logsq_model.terms.variables().empty()
                                ? Eigen::VectorXd::Constant(n, std::exp(m.logsq_model.coefficients(0)))
                                : Eigen::VectorXd(predict_eta(m.logsq_model, x).array().exp());
  m.gamma_hat = (m.step1_residuals.array().square() * w.array()).sum() / w.squaredNorm();
  if (!(m.gamma_hat > 0) || !std::isfinite(m.gamma_hat))
    throw Error(ErrorCode::degenerate_variance, "scale estimate is not positive");

  const Eigen::VectorXd sd = (m.gamma_hat * w.array()).sqrt();
  m.residuals = m.step1_residuals.cwiseQuotient(sd);
  std::sort(m.residuals.data(), m.residuals.data() + n);
  return m;
}

/// Atoms of the estimated conditional marker distribution at x.
inline Eigen::VectorXd support_points(const LocationScaleModel& m, const Columns& x, ClampCounter* clamps = nullptr) {
  const auto [mu, sd] = m.at(x, clamps);
  return (sd * m.residuals.array() + mu).matrix();
}

/// Empirical conditional CDF: share of atoms sigma(x) eps_i + mu(x) <= y.
inline double cdf_marker(const LocationScaleModel& m, double y, const Columns& x, ClampCounter* clamps = nullptr) {
  const auto [mu, sd] = m.at(x, clamps);
  const double* b = m.residuals.data();
  const double* e = b + m.residuals.size();
  // same predicate as a direct count; atoms are monotone in the sorted residuals
  const double* it = std::partition_point(b, e, [&](double r) { return sd * r + mu <= y; });
  return static_cast<double>(it - b) / static_cast<double>(m.residuals.size());
}

}  // namespace timeroc
