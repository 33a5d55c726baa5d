#pragma once

// Covariate-specific cumulative sensitivity / dynamic specificity, ROC
// curves and AUCs by plugging the fitted hazard and marker models into
// sums over the marker atoms sigma(x) eps_i + mu(x).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <cstdio>
#include <string>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/location_scale.hpp"
#include "timeroc/pam.hpp"
#include "timeroc/parallel.hpp"
#include "timeroc/quadrature.hpp"

namespace timeroc {

using CovariatePoint = std::map<std::string, double, std::less<>>;

inline Columns point_columns(const CovariatePoint& x) {
  Columns c;
  for (const auto& [name, v] : x) c[name] = Eigen::VectorXd::Constant(1, v);
  return c;
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Atoms a_i (ascending) with their survival probabilities S_T(t | a_i, x).
struct AtomWeights {
  Eigen::VectorXd atoms;
  Eigen::VectorXd survival;
  Eigen::VectorXd cum_event;     // prefix sums of 1 - S, length n + 1
  Eigen::VectorXd cum_survivor;  // prefix sums of S, length n + 1

  double events() const { return cum_event(cum_event.size() - 1); }
  double survivors() const { return cum_survivor(cum_survivor.size() - 1); }

  Eigen::Index at_or_below(double v) const {
    return std::upper_bound(atoms.data(), atoms.data() + atoms.size(), v) - atoms.data();
  }

  /// NaN when no atom carries event mass.
  double sensitivity(double v) const {
    const double d = events();
    if (!(d > 0)) return kNaN;
    return std::clamp((d - cum_event(at_or_below(v))) / d, 0.0, 1.0);
  }

  /// NaN when no atom carries survivor mass.
  double specificity(double v) const {
    const double s = survivors();
    if (!(s > 0)) return kNaN;
    return std::clamp(cum_survivor(at_or_below(v)) / s, 0.0, 1.0);
  }
};

inline AtomWeights make_atom_weights(Eigen::VectorXd atoms, Eigen::VectorXd surv) {
  AtomWeights w;
  w.atoms = std::move(atoms);
  w.survival = std::move(surv);
  const Eigen::Index n = w.atoms.size();
  w.cum_event.resize(n + 1);
  w.cum_survivor.resize(n + 1);
  w.cum_event(0) = 0.0;
  w.cum_survivor(0) = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w.cum_event(i + 1) = w.cum_event(i) + (1.0 - w.survival(i));
    w.cum_survivor(i + 1) = w.cum_survivor(i) + w.survival(i);
  }
  return w;
}

/// Survival of every atom at each horizon, one AtomWeights per time.
inline std::vector<AtomWeights> atom_weights(const FittedHazardModel& hm, const LocationScaleModel& ls,
                                             const std::vector<double>& times, const CovariatePoint& x,
                                             ClampCounter* clamps = nullptr) {
  const Columns xc = point_columns(x);
  const Eigen::VectorXd atoms = support_points(ls, xc, clamps);
  Columns subjects;
  for (const auto& [name, v] : x) subjects[name] = Eigen::VectorXd::Constant(atoms.size(), v);
  subjects[kMarkerVariable] = atoms;
  const HazardSurface hs(hm, subjects, clamps);
  std::vector<AtomWeights> out;
  for (double t : times) {
    const Eigen::VectorXd s = (-hs.cumulative_hazard(t, 50, 1e-6, 6400, clamps)).array().exp();
    out.push_back(make_atom_weights(atoms, s));
  }
  return out;
}

inline double sensitivity(const FittedHazardModel& hm, const LocationScaleModel& ls, double t, double v,
                          const CovariatePoint& x) {
  const double se = atom_weights(hm, ls, {t}, x)[0].sensitivity(v);
  if (std::isnan(se)) throw Error(ErrorCode::undefined_sensitivity, "no event mass by this time");
  return se;
}

inline double specificity(const FittedHazardModel& hm, const LocationScaleModel& ls, double t, double v,
                          const CovariatePoint& x) {
  const double sp = atom_weights(hm, ls, {t}, x)[0].specificity(v);
  if (std::isnan(sp)) throw Error(ErrorCode::undefined_sensitivity, "no survivor mass at this time");
  return sp;
}

/// ROC(p) by linear interpolation of the points (1 - Sp, Se) over the
/// thresholds, completed with (0, 0) and (1, 1). NaN when undefined.
inline std::vector<double> interpolate_roc(const std::vector<double>& se, const std::vector<double>& sp,
                                           const std::vector<double>& p_grid) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
  for (std::size_t l = 0; l < se.size(); ++l) {
    if (std::isnan(se[l]) || std::isnan(sp[l])) return std::vector<double>(p_grid.size(), kNaN);
    pts.emplace_back(1.0 - sp[l], se[l]);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  out.reserve(p_grid.size());
  for (double p : p_grid) {
    if (p <= 0.0) {
      out.push_back(0.0);
      continue;
    }
    if (p >= 1.0) {
      out.push_back(1.0);
      continue;
    }
    // last point with fpr <= p (largest Se among ties), next point beyond p
    const auto j = std::upper_bound(pts.begin(), pts.end(), p,
                                    [](double v, const std::pair<double, double>& q) { return v < q.first; });
    const auto i = j - 1;
    double r = i->second;
    if (j != pts.end()) r += (j->second - i->second) * (p - i->first) / (j->first - i->first);
    out.push_back(std::clamp(r, 0.0, 1.0));
  }
  return out;
}

inline std::vector<double> default_p_grid(int n = 101) {
  std::vector<double> p(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) p[static_cast<std::size_t>(k)] = static_cast<double>(k) / (n - 1);
  return p;
}

inline void check_equispaced(const std::vector<double>& g) {
  if (g.size() < 3 || g.size() % 2 == 0)
    throw Error(ErrorCode::invalid_grid, "Simpson AUC needs an odd number (>= 3) of p nodes");
  const double h = (g.back() - g.front()) / static_cast<double>(g.size() - 1);
  if (!(h > 0)) throw Error(ErrorCode::invalid_grid, "p grid must increase");
  for (std::size_t k = 1; k < g.size(); ++k)
    if (std::abs(g[k] - g[k - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw Error(ErrorCode::invalid_grid, "p grid must be equispaced");
}

/// Composite Simpson over ROC values on an odd, equispaced p grid.
inline double auc(const std::vector<double>& roc, const std::vector<double>& p_grid) {
  if (roc.size() != p_grid.size()) throw Error(ErrorCode::invalid_input, "ROC and p grid lengths differ");
  check_equispaced(p_grid);
  const int n = static_cast<int>(p_grid.size()) - 1;
  const std::vector<double> w = simpson_weights(p_grid.front(), p_grid.back(), n);
  double s = 0.0;
  for (std::size_t k = 0; k < roc.size(); ++k) s += w[k] * roc[k];
  return s;
}

inline double trapezoid_auc(const std::vector<double>& roc, const std::vector<double>& p_grid) {
  if (roc.size() != p_grid.size()) throw Error(ErrorCode::invalid_input, "ROC and p grid lengths differ");
  double s = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k) s += 0.5 * (roc[k] + roc[k - 1]) * (p_grid[k] - p_grid[k - 1]);
  return s;
}

inline void check_sorted_grid(const std::vector<double>& g, const char* what) {
  if (g.empty()) throw Error(ErrorCode::invalid_grid, std::string(what) + " grid is empty");
  for (std::size_t k = 1; k < g.size(); ++k)
    if (!(g[k] > g[k - 1])) throw Error(ErrorCode::invalid_grid, std::string(what) + " grid must increase");
}

/// 200 equispaced thresholds spanning the atoms at all requested x, widened
/// by 5% of the range on either side.
inline std::vector<double> default_thresholds(const LocationScaleModel& ls, const std::vector<CovariatePoint>& xs,
                                              int n = 200) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& x : xs) {
    const Eigen::VectorXd a = support_points(ls, point_columns(x));
    lo = std::min(lo, a.minCoeff());
    hi = std::max(hi, a.maxCoeff());
  }
  const double pad = 0.05 * std::max(hi - lo, 1e-12);
  lo -= pad;
  hi += pad;
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int l = 0; l < n; ++l) g[static_cast<std::size_t>(l)] = lo + (hi - lo) * l / (n - 1);
  return g;
}

struct RocRequest {
  std::vector<double> times;
  std::vector<CovariatePoint> xs;
  std::vector<double> p_grid = default_p_grid();
  std::vector<double> thresholds;  // empty: default_thresholds
};

struct RocCell {
  double t = 0.0;
  CovariatePoint x;
  std::vector<double> se, sp, roc;
  double auc = kNaN;
  bool defined = true;
  // bootstrap percentile bands (filled by bootstrap_bands)
  double auc_lower = kNaN, auc_upper = kNaN;
  std::vector<double> roc_lower, roc_upper;
};

struct RocSurface {
  std::vector<double> thresholds;
  std::vector<double> p_grid;
  std::vector<RocCell> cells;  // time-major: cells[it * xs.size() + ix]
  std::vector<std::string> warnings;

  const RocCell& cell(std::size_t it, std::size_t ix, std::size_t nx) const { return cells[it * nx + ix]; }
};

inline std::string describe(const CovariatePoint& x) {
  std::string s;
  for (const auto& [name, v] : x) {
    if (!s.empty()) s += ",";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%.6g", name.c_str(), v);
    s += buf;
  }
  return s.empty() ? "(none)" : s;
}

inline RocSurface evaluate_roc(const FittedHazardModel& hm, const LocationScaleModel& ls, const RocRequest& req) {
  if (req.times.empty()) throw Error(ErrorCode::invalid_input, "no evaluation times");
  for (double t : req.times)
    if (!(t > 0) || !std::isfinite(t)) throw Error(ErrorCode::invalid_input, "evaluation times must be positive");
  const std::vector<CovariatePoint> xs = req.xs.empty() ? std::vector<CovariatePoint>{CovariatePoint{}} : req.xs;
  check_equispaced(req.p_grid);
  RocSurface out;
  out.p_grid = req.p_grid;
  out.thresholds = req.thresholds.empty() ? default_thresholds(ls, xs) : req.thresholds;
  check_sorted_grid(out.thresholds, "threshold");
  out.cells.resize(req.times.size() * xs.size());
  ClampCounter clamps;
  for (std::size_t ix = 0; ix < xs.size(); ++ix) {
    const std::vector<AtomWeights> w = atom_weights(hm, ls, req.times, xs[ix], &clamps);
    for (std::size_t it = 0; it < req.times.size(); ++it) {
      RocCell& c = out.cells[it * xs.size() + ix];
      c.t = req.times[it];
      c.x = xs[ix];
      for (double v : out.thresholds) {
        c.se.push_back(w[it].sensitivity(v));
        c.sp.push_back(w[it].specificity(v));
      }
      c.defined = w[it].events() > 0 && w[it].survivors() > 0;
      if (!c.defined) {
        std::fill(c.se.begin(), c.se.end(), kNaN);
        std::fill(c.sp.begin(), c.sp.end(), kNaN);
        out.warnings.push_back("undefined-sensitivity: no event or survivor mass at t=" + std::to_string(c.t) +
                               ", x=" + describe(c.x));
      }
      c.roc = interpolate_roc(c.se, c.sp, out.p_grid);
      c.auc = c.defined ? auc(c.roc, out.p_grid) : kNaN;
    }
  }
  if (clamps.count)
    out.warnings.push_back("clamped: " + std::to_string(clamps.count) +
                           " evaluations outside the fitted range were clamped to the boundary");
  return out;
}

// ---------------------------------------------------------------------------
// Joint fit and bootstrap

struct FitConfig {
  ModelSpec hazard;
  LocationScaleSpec marker;
  BreakRule breaks;
  FitOptions hazard_options;
  FitOptions marker_options;
};

struct FittedPair {
  FittedHazardModel hazard;
  LocationScaleModel marker;
};

inline FittedPair fit_models(const SurvivalData& data, const FitConfig& cfg) {
  FittedPair f;
  f.hazard = fit_hazard(data, cfg.hazard, cfg.breaks, cfg.hazard_options);
  f.marker = fit_location_scale(data.marker, data.covariates, cfg.marker, cfg.marker_options, cfg.marker_options);
  return f;
}

/// Type-7 sample quantile of unsorted values.
inline double quantile7(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

/// Stream for replicate `index` of a run seeded with `seed`; independent of
/// the order in which replicates are executed.
inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index, std::uint32_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream};
  return std::mt19937_64(seq);
}

/// Resampled record indices for bootstrap replicate b.
using Resampler = std::function<std::vector<Eigen::Index>(std::size_t b, Eigen::Index n)>;

inline Resampler seeded_resampler(std::uint64_t seed) {
  return [seed](std::size_t b, Eigen::Index n) {
    std::mt19937_64 rng = replicate_rng(seed, b, 0x626f6f74u);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return idx;
  };
}

struct BootstrapOptions {
  int replicates = 500;
  double level = 0.95;
  std::uint64_t seed = 1;
  bool roc_bands = true;
  Resampler resampler;  // default: seeded_resampler(seed)
};

struct BootstrapSummary {
  int requested = 0;
  int failed = 0;
  std::vector<std::string> failures;  // one reason per failed replicate
  std::vector<std::vector<double>> auc_replicates;  // per cell, successful replicates in order
};

/// Percentile bands by refitting both models on resampled records. Fills
/// the band fields of `surface` (whose grids are reused for every replicate).
inline BootstrapSummary bootstrap_bands(const SurvivalData& data, const FitConfig& cfg, const RocRequest& req,
                                        RocSurface& surface, const BootstrapOptions& opt) {
  if (opt.replicates < 2) throw Error(ErrorCode::invalid_input, "bootstrap needs at least 2 replicates");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw Error(ErrorCode::invalid_input, "level must lie in (0, 1)");
  const Resampler resample = opt.resampler ? opt.resampler : seeded_resampler(opt.seed);
  RocRequest fixed = req;
  fixed.thresholds = surface.thresholds;
  fixed.p_grid = surface.p_grid;
  const auto B = static_cast<std::size_t>(opt.replicates);
  std::vector<std::optional<RocSurface>> reps(B);
  std::vector<std::string> reasons(B);
  parallel_for(B, [&](std::size_t b) {
    try {
      const SurvivalData boot = data.subset(resample(b, data.size()));
      const FittedPair f = fit_models(boot, cfg);
      reps[b] = evaluate_roc(f.hazard, f.marker, fixed);
    } catch (const std::exception& e) {
      reasons[b] = e.what();
    }
  });
  BootstrapSummary s;
  s.requested = opt.replicates;
  for (std::size_t b = 0; b < B; ++b)
    if (!reps[b]) {
      ++s.failed;
      s.failures.push_back("replicate " + std::to_string(b) + ": " + reasons[b]);
    }
  if (s.failed > 0.2 * opt.replicates)
    throw Error(ErrorCode::bootstrap_unreliable,
                std::to_string(s.failed) + " of " + std::to_string(opt.replicates) + " bootstrap refits failed");
  const double alpha = 1.0 - opt.level;
  s.auc_replicates.resize(surface.cells.size());
  for (std::size_t c = 0; c < surface.cells.size(); ++c) {
    RocCell& cell = surface.cells[c];
    std::vector<double>& a = s.auc_replicates[c];
    for (std::size_t b = 0; b < B; ++b)
      if (reps[b] && !std::isnan(reps[b]->cells[c].auc)) a.push_back(reps[b]->cells[c].auc);
    cell.auc_lower = quantile7(a, alpha / 2);
    cell.auc_upper = quantile7(a, 1 - alpha / 2);
    if (opt.roc_bands) {
      cell.roc_lower.assign(surface.p_grid.size(), kNaN);
      cell.roc_upper.assign(surface.p_grid.size(), kNaN);
      for (std::size_t k = 0; k < surface.p_grid.size(); ++k) {
        std::vector<double> r;
        for (std::size_t b = 0; b < B; ++b)
          if (reps[b] && !std::isnan(reps[b]->cells[c].roc[k])) r.push_back(reps[b]->cells[c].roc[k]);
        cell.roc_lower[k] = quantile7(r, alpha / 2);
        cell.roc_upper[k] = quantile7(r, 1 - alpha / 2);
      }
    }
  }
  for (const auto& f : s.failures) surface.warnings.push_back("bootstrap-failure: " + f);
  return s;
}

}  // namespace timeroc
