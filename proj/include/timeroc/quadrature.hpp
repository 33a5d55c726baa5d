#pragma once

// One-dimensional quadrature and bracketed root finding.

#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "timeroc/error.hpp"

namespace timeroc {

/// Composite Simpson rule with n (even) panels.
template <class F>
double composite_simpson(F&& f, double a, double b, int n) {
  if (n < 2 || n % 2 != 0) throw Error(ErrorCode::invalid_grid, "Simpson rule needs an even panel count >= 2");
  if (a == b) return 0.0;
  const double h = (b - a) / n;
  double odd = 0.0, even = 0.0;
  for (int k = 1; k < n; ++k) (k % 2 ? odd : even) += f(a + k * h);
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

/// Simpson weights for n + 1 equispaced nodes on [a, b].
inline std::vector<double> simpson_weights(double a, double b, int n) {
  if (n < 2 || n % 2 != 0) throw Error(ErrorCode::invalid_grid, "Simpson rule needs an even panel count >= 2");
  const double h = (b - a) / n;
  std::vector<double> w(static_cast<std::size_t>(n + 1));
  for (int k = 0; k <= n; ++k) w[static_cast<std::size_t>(k)] = (k == 0 || k == n) ? h / 3.0 : (k % 2 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
  return w;
}

struct SimpsonResult {
  double value = 0.0;
  int panels = 0;
  bool converged = false;
};

/// Composite Simpson starting at `n` panels and doubling until the relative
/// change drops below `rel_tol` or `cap` panels are reached.
template <class F>
SimpsonResult simpson_doubling(F&& f, double a, double b, int n = 50, double rel_tol = 1e-6, int cap = 6400) {
  SimpsonResult r;
  r.panels = n;
  r.value = composite_simpson(f, a, b, n);
  while (r.panels < cap) {
    const int next = r.panels * 2;
    const double v = composite_simpson(f, a, b, next);
    const double change = std::abs(v - r.value);
    r.value = v;
    r.panels = next;
    if (change <= rel_tol * std::abs(v) || change == 0.0) {
      r.converged = true;
      return r;
    }
  }
  return r;
}

namespace detail {

template <class F>
double adaptive_simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                             int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction. The interval is
/// first split into `initial` panels so that narrow features are not missed.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-12, int max_depth = 40, int initial = 8) {
  if (a == b) return 0.0;
  const double h = (b - a) / initial;
  double total = 0.0;
  for (int k = 0; k < initial; ++k) {
    const double lo = a + k * h, hi = (k + 1 == initial) ? b : a + (k + 1) * h;
    const double flo = f(lo), fhi = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += detail::adaptive_simpson_step(f, lo, hi, flo, fm, fhi, whole, tol / initial, max_depth);
  }
  return total;
}

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss–Legendre rule on [-1, 1], nodes ascending.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorCode::invalid_grid, "Gauss-Legendre rule needs at least one node");
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);  // non-negative half
  GaussRule g;
  auto weight = [n](double x) {
    const double p = boost::math::legendre_p_prime(n, x);
    return 2.0 / ((1.0 - x * x) * p * p);
  };
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it) {
    if (*it == 0.0) continue;
    g.nodes.push_back(-*it);
    g.weights.push_back(weight(*it));
  }
  for (double z : zeros) {
    g.nodes.push_back(z);
    g.weights.push_back(weight(z));
  }
  return g;
}

/// Gauss–Legendre rule mapped to [a, b].
inline GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule g = gauss_legendre(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    g.nodes[k] = mid + half * g.nodes[k];
    g.weights[k] *= half;
  }
  return g;
}

/// Root of f in [a, b] where f(a), f(b) have opposite signs (TOMS 748, a
/// Brent-type bracketing method). Stops when the bracket is narrower than
/// `abs_tol + rel_tol * |endpoint|`.
template <class F>
double bracketed_root(F&& f, double a, double b, double fa, double fb, double abs_tol = 1e-12,
                      double rel_tol = 0.0) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw Error(ErrorCode::generation_failure, "root is not bracketed");
  std::uintmax_t iters = 200;
  auto tol = [abs_tol, rel_tol](double lo, double hi) {
    return std::abs(hi - lo) <= abs_tol + rel_tol * std::min(std::abs(lo), std::abs(hi));
  };
  const std::pair<double, double> r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  const double fl = f(r.first), fh = f(r.second);
  return std::abs(fl) <= std::abs(fh) ? r.first : r.second;
}

}  // namespace timeroc
