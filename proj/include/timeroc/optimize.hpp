#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace timeroc {

struct NelderMeadOptions {
  double initial_step = 1.0;
  double f_tolerance = 1e-8;
  double x_tolerance = 1e-4;
  int max_evaluations = 500;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

/// Box-clamped Nelder–Mead simplex minimiser (standard coefficients).
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& start, const NelderMeadOptions& opt = {}) {
  const Eigen::Index d = start.size();
  NelderMeadResult res;
  auto clamp = [&](Eigen::VectorXd v) {
    for (Eigen::Index k = 0; k < d; ++k) v(k) = std::clamp(v(k), opt.lower, opt.upper);
    return v;
  };
  auto eval = [&](const Eigen::VectorXd& v) {
    ++res.evaluations;
    const double y = f(v);
    return std::isfinite(y) ? y : std::numeric_limits<double>::infinity();
  };
  if (d == 0) {
    res.x = start;
    res.value = eval(start);
    res.converged = true;
    return res;
  }

  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  pts.push_back(clamp(start));
  vals.push_back(eval(pts[0]));
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXd p = pts[0];
    p(k) += opt.initial_step;
    if (p(k) > opt.upper) p(k) = pts[0](k) - opt.initial_step;
    pts.push_back(clamp(p));
    vals.push_back(eval(pts.back()));
  }
  std::vector<std::size_t> order(pts.size());

  while (res.evaluations < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    double extent = 0.0;
    for (const auto& p : pts) extent = std::max(extent, (p - pts[best]).cwiseAbs().maxCoeff());
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(spread) && spread <= opt.f_tolerance * (1.0 + std::abs(vals[best])) &&
        extent <= opt.x_tolerance * 1e3) {
      res.converged = true;
      break;
    }
    if (extent <= opt.x_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (k != worst) centroid += pts[k];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = clamp(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc =
        clamp(outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                      : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid)));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = clamp(pts[best] + 0.5 * (pts[k] - pts[best]));
      vals[k] = eval(pts[k]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

}  // namespace timeroc
