#pragma once

// Simulation harness: the three data-generating scenarios, exact ("true")
// ROC/AUC quantities by numerical integration, performance metrics and a
// replicated study driver.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/parallel.hpp"
#include "timeroc/quadrature.hpp"
#include "timeroc/roc.hpp"

namespace timeroc {

enum class Scenario { I, II, III };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::I: return "I";
    case Scenario::II: return "II";
    case Scenario::III: return "III";
  }
  return "?";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "I" || s == "1") return Scenario::I;
  if (s == "II" || s == "2") return Scenario::II;
  if (s == "III" || s == "3") return Scenario::III;
  throw Error(ErrorCode::invalid_input, "unknown scenario '" + std::string(s) + "'");
}

/// Quartiles of the observed times used as evaluation horizons.
inline std::array<double, 3> scenario_quartiles(Scenario s) {
  switch (s) {
    case Scenario::I: return {0.015, 0.05, 0.1};
    case Scenario::II: return {0.04, 0.10, 0.15};
    case Scenario::III: return {0.09, 0.24, 0.38};
  }
  return {};
}

struct ScenarioSpec {
  Scenario id = Scenario::I;
  double a = 1.0;  // censoring C ~ Exp(rate 1 / (a + b|x|)), capped at truncation
  double b = 1.0;
  double truncation = 20.0;
  bool constant_hazard = false;  // eta == 0, for checking the generator

  std::array<double, 3> quartiles() const { return scenario_quartiles(id); }
};

inline double log_hazard(const ScenarioSpec& s, double t, double y, double x) {
  if (s.constant_hazard) return 0.0;
  const double lt = std::log(t + 0.2);
  switch (s.id) {
    case Scenario::I: return 2.0 + lt + y + 0.1 * x;
    case Scenario::II: return 2.0 + lt + y * y * y / 20.0 + 0.5 * std::sin(2.0 * (x + 1.5));
    case Scenario::III: return (2.0 + lt) * (y * y * y / 20.0) + 0.5 * std::sin(2.0 * (x + 1.5));
  }
  return 0.0;
}

/// Cumulative hazard over [t0, t1] by adaptive Simpson.
inline double true_cumulative_hazard(const ScenarioSpec& s, double t0, double t1, double y, double x) {
  if (t1 <= t0) return 0.0;
  auto f = [&](double u) { return std::exp(log_hazard(s, u, y, x)); };
  const double rough = composite_simpson(f, t0, t1, 8);
  return adaptive_simpson(f, t0, t1, 1e-13 * (1.0 + std::abs(rough)), 40, 8);
}

inline double true_survival(const ScenarioSpec& s, double t, double y, double x) {
  if (t <= 0.0) return 1.0;
  return std::exp(-true_cumulative_hazard(s, 0.0, t, y, x));
}

/// Event time with S_T(t | y, x) = u. Returns +infinity when the event would
/// fall beyond the truncation horizon: every censoring time is capped there,
/// so such a subject is censored whatever its exact event time.
inline double invert_survival(const ScenarioSpec& s, double u, double y, double x) {
  constexpr double floor_time = 1e-12;
  if (u >= 1.0) return floor_time;
  if (u <= 0.0) return std::numeric_limits<double>::infinity();
  auto f = [&](double t) { return true_survival(s, t, y, x) - u; };
  double hi = 1.0, fhi = f(hi);
  for (int k = 0; fhi > 0.0; ++k) {
    if (hi >= s.truncation) return std::numeric_limits<double>::infinity();
    if (k >= 60) throw Error(ErrorCode::generation_failure, "could not bracket the event time");
    hi = std::min(2.0 * hi, s.truncation);
    fhi = f(hi);
  }
  // relative tolerance: with very large hazards the root sits near zero
  const double t = bracketed_root(f, 0.0, hi, 1.0 - u, fhi, 1e-300, 4e-16);
  if (std::abs(f(t)) >= 1e-8) throw Error(ErrorCode::generation_failure, "survival inversion is inaccurate");
  return std::max(t, floor_time);
}

struct GeneratedData {
  SurvivalData data;
  Eigen::VectorXd event_time;  // +inf when beyond the truncation horizon
  Eigen::VectorXd censor_time;
  Eigen::VectorXd u;
};

/// Draws n records: x ~ N(1,1), y ~ N(x,1), capped exponential censoring,
/// event times by inverting the true survival function.
inline GeneratedData generate_detailed(const ScenarioSpec& s, Eigen::Index n, std::mt19937_64& rng) {
  if (n < 1) throw Error(ErrorCode::invalid_input, "need at least one record");
  GeneratedData g;
  Eigen::VectorXd x(n);
  g.data.marker.resize(n);
  g.data.z.resize(n);
  g.data.delta.resize(n);
  g.event_time.resize(n);
  g.censor_time.resize(n);
  g.u.resize(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = 1.0 + normal(rng);
    g.data.marker(i) = x(i) + normal(rng);
    g.censor_time(i) = std::min((s.a + s.b * std::abs(x(i))) * expo(rng), s.truncation);
    g.u(i) = unif(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = invert_survival(s, g.u(i), g.data.marker(i), x(i));
    g.event_time(i) = t;
    g.data.z(i) = std::min(t, g.censor_time(i));
    g.data.delta(i) = t <= g.censor_time(i) ? 1.0 : 0.0;
  }
  g.data.covariates["x"] = x;
  return g;
}

inline SurvivalData generate(const ScenarioSpec& s, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng = replicate_rng(seed, 0, 0x67656eu);
  return generate_detailed(s, n, rng).data;
}

// ---------------------------------------------------------------------------
// Censoring calibration

struct CensoringCalibration {
  double a = 0.0;
  double b = 0.0;
  double rate = 0.0;  // achieved P(T > C) on the calibration draws
  int draws = 0;
};

/// Common random numbers for censoring-rate evaluation: event times and the
/// unit-exponential censoring draws, reused for every candidate (a, b).
struct CensoringDraws {
  std::vector<double> t, abs_x, e;
};

inline CensoringDraws censoring_draws(const ScenarioSpec& s, int draws, std::uint64_t seed) {
  std::mt19937_64 rng = replicate_rng(seed, 0, 0x63616cu);
  const GeneratedData g = generate_detailed(s, draws, rng);
  CensoringDraws d;
  const Eigen::VectorXd& x = g.data.covariates.at("x");
  std::exponential_distribution<double> expo(1.0);
  for (int i = 0; i < draws; ++i) {
    d.t.push_back(g.event_time(i));
    d.abs_x.push_back(std::abs(x(i)));
    d.e.push_back(expo(rng));
  }
  return d;
}

inline double censoring_rate(const CensoringDraws& d, double a, double b, double truncation) {
  std::size_t censored = 0;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    const double c = std::min((a + b * d.abs_x[i]) * d.e[i], truncation);
    if (d.t[i] > c) ++censored;
  }
  return static_cast<double>(censored) / static_cast<double>(d.t.size());
}

/// Bisection on log(a) with b = a until the Monte-Carlo censoring rate is
/// within 0.01 of the target.
inline CensoringCalibration calibrate_censoring(Scenario id, double target = 0.5, int draws = 50000,
                                                std::uint64_t seed = 20240601) {
  if (!(target > 0.0 && target < 1.0)) throw Error(ErrorCode::invalid_input, "target must lie in (0, 1)");
  ScenarioSpec s;
  s.id = id;
  const CensoringDraws d = censoring_draws(s, draws, seed);
  double lo = std::log(1e-8), hi = std::log(1e6);
  auto rate = [&](double la) { return censoring_rate(d, std::exp(la), std::exp(la), s.truncation); };
  const double r_lo = rate(lo), r_hi = rate(hi);
  // the rate decreases in a
  if (!(r_lo > target && r_hi < target))
    throw Error(ErrorCode::calibration_failure, "censoring rate does not bracket the target");
  CensoringCalibration c;
  c.draws = draws;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = rate(mid);
    c.a = c.b = std::exp(mid);
    c.rate = r;
    if (std::abs(r - target) < 0.01 && it > 40) break;
    (r > target ? lo : hi) = mid;
    if (hi - lo < 1e-12) break;
  }
  if (std::abs(c.rate - target) >= 0.01) throw Error(ErrorCode::calibration_failure, "target rate not reached");
  return c;
}

// ---------------------------------------------------------------------------
// True curves

struct MetricGrid {
  std::vector<double> x;          // x_j = -1 + 4 (j - 1) / (n_X - 1)
  std::vector<double> p;          // p_k = (k - 1) / (n_P - 1)
  std::vector<double> upsilon;    // v_l = -3 + 8 (l - 1) / (n_v - 1)

  static MetricGrid standard(int nx = 50, int np = 101, int nv = 200) {
    MetricGrid g;
    for (int j = 1; j <= nx; ++j) g.x.push_back(-1.0 + 4.0 * (j - 1) / (nx - 1));
    for (int k = 1; k <= np; ++k) g.p.push_back(static_cast<double>(k - 1) / (np - 1));
    for (int l = 1; l <= nv; ++l) g.upsilon.push_back(-3.0 + 8.0 * (l - 1) / (nv - 1));
    return g;
  }
};

struct TrueCurves {
  std::vector<double> se, sp;  // at the upsilon grid
  std::vector<double> roc;     // at the p grid
  double auc = 0.0;
};

/// Se/Sp/ROC/AUC from the true S_T and the N(x, 1) marker law. The marker
/// integrals use Gauss-Legendre panels whose edges include every threshold,
/// so tail integrals above each threshold are exact panel sums. The ROC is
/// interpolated over all panel edges, a much finer threshold set than the
/// metric grid.
inline std::vector<TrueCurves> true_curves(const ScenarioSpec& s, const std::vector<double>& times, double x,
                                           const std::vector<double>& p_grid, const std::vector<double>& upsilon,
                                           int panels = 300, int nodes = 6) {
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw Error(ErrorCode::invalid_input, "times must increase");
  const double lo = x - 9.0, hi = x + 9.0;
  std::vector<double> edges;
  for (int k = 0; k <= panels; ++k) edges.push_back(lo + (hi - lo) * k / panels);
  for (double v : upsilon)
    if (v > lo && v < hi) edges.push_back(v);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  const GaussRule ref = gauss_legendre(nodes);
  const std::size_t ne = edges.size(), nt = times.size();
  // per panel and time: mass of (1 - S) and S against the marker density
  std::vector<std::vector<double>> ev(nt, std::vector<double>(ne - 1, 0.0)), sv = ev;
  for (std::size_t k = 0; k + 1 < ne; ++k) {
    const double a = edges[k], b = edges[k + 1], half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int q = 0; q < nodes; ++q) {
      const double y = mid + half * ref.nodes[static_cast<std::size_t>(q)];
      const double w = half * ref.weights[static_cast<std::size_t>(q)] * std::exp(-0.5 * (y - x) * (y - x)) /
                       std::sqrt(2.0 * std::numbers::pi);
      double cum = 0.0, prev = 0.0;
      for (std::size_t it = 0; it < nt; ++it) {
        cum += true_cumulative_hazard(s, prev, times[it], y, x);
        prev = times[it];
        const double surv = std::exp(-cum);
        ev[it][k] += w * (1.0 - surv);
        sv[it][k] += w * surv;
      }
    }
  }
  std::vector<TrueCurves> out(nt);
  for (std::size_t it = 0; it < nt; ++it) {
    // above[k]: event mass above edge k; below[k]: survivor mass below edge k
    std::vector<double> above(ne, 0.0), below(ne, 0.0);
    for (std::size_t k = ne - 1; k-- > 0;) above[k] = above[k + 1] + ev[it][k];
    for (std::size_t k = 1; k < ne; ++k) below[k] = below[k - 1] + sv[it][k - 1];
    const double de = above[0], ds = below[ne - 1];
    auto se_at = [&](std::size_t k) { return de > 0 ? above[k] / de : kNaN; };
    auto sp_at = [&](std::size_t k) { return ds > 0 ? below[k] / ds : kNaN; };
    TrueCurves& c = out[it];
    for (double v : upsilon) {
      if (v <= lo) {
        c.se.push_back(de > 0 ? 1.0 : kNaN);
        c.sp.push_back(ds > 0 ? 0.0 : kNaN);
      } else if (v >= hi) {
        c.se.push_back(de > 0 ? 0.0 : kNaN);
        c.sp.push_back(ds > 0 ? 1.0 : kNaN);
      } else {
        const auto k = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
        c.se.push_back(se_at(k));
        c.sp.push_back(sp_at(k));
      }
    }
    std::vector<double> se_all, sp_all;
    for (std::size_t k = 0; k < ne; ++k) {
      se_all.push_back(se_at(k));
      sp_all.push_back(sp_at(k));
    }
    c.roc = interpolate_roc(se_all, sp_all, p_grid);
    c.auc = std::isnan(c.roc[p_grid.size() / 2]) ? kNaN : auc(c.roc, p_grid);
  }
  return out;
}

inline double true_auc(const ScenarioSpec& s, double t, double x) {
  return true_curves(s, {t}, x, default_p_grid(), {})[0].auc;
}

// ---------------------------------------------------------------------------
// Metrics

/// Root mean squared difference over all grid points (rows: covariate
/// values, columns: p or threshold values).
inline double ermse(const std::vector<std::vector<double>>& est, const std::vector<std::vector<double>>& truth) {
  if (est.size() != truth.size() || est.empty()) throw Error(ErrorCode::invalid_input, "grid mismatch");
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < est.size(); ++j) {
    if (est[j].size() != truth[j].size()) throw Error(ErrorCode::invalid_input, "grid mismatch");
    for (std::size_t k = 0; k < est[j].size(); ++k) {
      const double d = est[j][k] - truth[j][k];
      ss += d * d;
      ++count;
    }
  }
  return std::sqrt(ss / static_cast<double>(count));
}

inline double bias(const std::vector<double>& est, const std::vector<double>& truth) {
  if (est.size() != truth.size() || est.empty()) throw Error(ErrorCode::invalid_input, "grid mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < est.size(); ++j) s += est[j] - truth[j];
  return s / static_cast<double>(est.size());
}

// ---------------------------------------------------------------------------
// Study driver

/// Hazard and marker models used for every simulated data set: all main
/// effects and pairwise interactions (margin-constrained tensor products),
/// with J = 8 per margin; marker mean and log-variance with J = 13.
inline FitConfig simulation_fit_config(bool double_penalty = true, BreakRule breaks = {}) {
  auto smooth = [](const std::string& v, int J) {
    TermSpec t;
    t.kind = TermKind::smooth1d;
    t.variables = {v};
    t.dimension = J;
    return t;
  };
  auto inter = [](const std::string& a, const std::string& b) {
    TermSpec t;
    t.kind = TermKind::smooth2d;
    t.variables = {a, b};
    t.dimension = 8;
    t.interaction_only = true;
    return t;
  };
  FitConfig c;
  c.hazard.terms = {smooth("t", 8), smooth("x", 8), smooth("y", 8), inter("x", "t"), inter("y", "t"), inter("x", "y")};
  c.marker.mean.terms = {smooth("x", 13)};
  c.marker.logsq.terms = {smooth("x", 13)};
  c.breaks = breaks;
  c.hazard_options.double_penalty = double_penalty;
  c.marker_options.double_penalty = double_penalty;
  return c;
}

struct StudyConfig {
  std::vector<Scenario> scenarios{Scenario::I, Scenario::II, Scenario::III};
  std::vector<int> sizes{300, 600};
  int replicates = 100;
  std::uint64_t seed = 1;
  bool double_penalty = true;
  BreakRule breaks;
  double censoring_target = 0.5;
  int calibration_draws = 50000;
  MetricGrid grid = MetricGrid::standard();
};

struct StudyRow {
  Scenario scenario = Scenario::I;
  int n = 0;
  int replicate = 0;
  int time_index = 0;
  double t = 0.0;
  bool ok = true;
  std::string reason;
  double censoring = kNaN;  // observed censoring fraction of the data set
  double ermse_roc = kNaN, ermse_se = kNaN, ermse_sp = kNaN;
  double bias_auc = kNaN;
  std::vector<double> auc_error;  // estimated - true AUC over the x grid
};

struct ScenarioTruth {
  Scenario scenario = Scenario::I;
  CensoringCalibration calibration;
  std::array<double, 3> times{};
  // [time][x] curves
  std::vector<std::vector<TrueCurves>> curves;
};

struct StudyResult {
  std::vector<ScenarioTruth> truths;
  std::vector<StudyRow> rows;
  int failed_replicates = 0;
};

inline ScenarioTruth scenario_truth(const ScenarioSpec& spec, const CensoringCalibration& cal, const MetricGrid& g) {
  ScenarioTruth tr;
  tr.scenario = spec.id;
  tr.calibration = cal;
  tr.times = spec.quartiles();
  const std::vector<double> times(tr.times.begin(), tr.times.end());
  std::vector<std::vector<TrueCurves>> by_x(g.x.size());
  parallel_for(g.x.size(), [&](std::size_t j) { by_x[j] = true_curves(spec, times, g.x[j], g.p, g.upsilon); });
  tr.curves.assign(times.size(), std::vector<TrueCurves>(g.x.size()));
  for (std::size_t j = 0; j < g.x.size(); ++j)
    for (std::size_t it = 0; it < times.size(); ++it) tr.curves[it][j] = by_x[j][it];
  return tr;
}

/// Estimated curves of one fitted data set against the truth; one row per
/// evaluation time.
inline std::vector<StudyRow> evaluate_replicate(const FittedPair& fit, const ScenarioTruth& truth,
                                                const MetricGrid& g) {
  const std::vector<double> times(truth.times.begin(), truth.times.end());
  std::vector<CovariatePoint> xs;
  for (double x : g.x) xs.push_back(CovariatePoint{{"x", x}});
  const std::vector<double> thresholds = default_thresholds(fit.marker, xs);
  const std::size_t nt = times.size(), nx = xs.size();
  std::vector<std::vector<std::vector<double>>> roc(nt), se(nt), sp(nt), roc_t(nt), se_t(nt), sp_t(nt);
  std::vector<std::vector<double>> auc_est(nt), auc_true(nt);
  for (std::size_t j = 0; j < nx; ++j) {
    const std::vector<AtomWeights> w = atom_weights(fit.hazard, fit.marker, times, xs[j]);
    for (std::size_t it = 0; it < nt; ++it) {
      std::vector<double> se_d, sp_d, se_u, sp_u;
      for (double v : thresholds) {
        se_d.push_back(w[it].sensitivity(v));
        sp_d.push_back(w[it].specificity(v));
      }
      for (double v : g.upsilon) {
        se_u.push_back(w[it].sensitivity(v));
        sp_u.push_back(w[it].specificity(v));
      }
      const std::vector<double> r = interpolate_roc(se_d, sp_d, g.p);
      const TrueCurves& tc = truth.curves[it][j];
      roc[it].push_back(r);
      roc_t[it].push_back(tc.roc);
      se[it].push_back(se_u);
      se_t[it].push_back(tc.se);
      sp[it].push_back(sp_u);
      sp_t[it].push_back(tc.sp);
      auc_est[it].push_back(auc(r, g.p));
      auc_true[it].push_back(tc.auc);
    }
  }
  std::vector<StudyRow> rows(nt);
  for (std::size_t it = 0; it < nt; ++it) {
    StudyRow& row = rows[it];
    row.time_index = static_cast<int>(it);
    row.t = times[it];
    row.ermse_roc = ermse(roc[it], roc_t[it]);
    row.ermse_se = ermse(se[it], se_t[it]);
    row.ermse_sp = ermse(sp[it], sp_t[it]);
    row.bias_auc = bias(auc_est[it], auc_true[it]);
    for (std::size_t j = 0; j < nx; ++j) row.auc_error.push_back(auc_est[it][j] - auc_true[it][j]);
  }
  return rows;
}

/// Stream tag keeping (scenario, n) pairs on separate random streams.
inline std::uint32_t study_stream(Scenario s, int n) {
  return static_cast<std::uint32_t>(static_cast<int>(s) * 100000 + n);
}

inline StudyResult run_study(const StudyConfig& cfg,
                             const std::vector<std::optional<CensoringCalibration>>& calibrations = {}) {
  if (cfg.replicates < 1) throw Error(ErrorCode::invalid_input, "need at least one replicate");
  StudyResult out;
  const FitConfig fit_cfg = simulation_fit_config(cfg.double_penalty, cfg.breaks);
  for (std::size_t si = 0; si < cfg.scenarios.size(); ++si) {
    const Scenario id = cfg.scenarios[si];
    const CensoringCalibration cal = si < calibrations.size() && calibrations[si]
                                         ? *calibrations[si]
                                         : calibrate_censoring(id, cfg.censoring_target, cfg.calibration_draws);
    ScenarioSpec spec;
    spec.id = id;
    spec.a = cal.a;
    spec.b = cal.b;
    out.truths.push_back(scenario_truth(spec, cal, cfg.grid));
    const ScenarioTruth& truth = out.truths.back();
    for (int n : cfg.sizes) {
      std::vector<std::vector<StudyRow>> reps(static_cast<std::size_t>(cfg.replicates));
      parallel_for(reps.size(), [&](std::size_t r) {
        std::vector<StudyRow> rows;
        double cens = kNaN;
        try {
          std::mt19937_64 rng = replicate_rng(cfg.seed, r, study_stream(id, n));
          const GeneratedData g = generate_detailed(spec, n, rng);
          cens = g.data.censoring_fraction();
          rows = evaluate_replicate(fit_models(g.data, fit_cfg), truth, cfg.grid);
        } catch (const std::exception& e) {
          rows.assign(truth.times.size(), StudyRow{});
          for (std::size_t it = 0; it < rows.size(); ++it) {
            rows[it].ok = false;
            rows[it].reason = e.what();
            rows[it].time_index = static_cast<int>(it);
            rows[it].t = truth.times[it];
          }
        }
        for (StudyRow& row : rows) {
          row.scenario = id;
          row.n = n;
          row.replicate = static_cast<int>(r);
          row.censoring = cens;
        }
        reps[r] = std::move(rows);
      });
      for (auto& rows : reps) {
        if (!rows.empty() && !rows[0].ok) ++out.failed_replicates;
        for (auto& row : rows) out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

/// Mean over the x grid of |mean over replicates of (estimated - true AUC)|
/// for the given scenario, sample size and time index.
inline double mean_abs_auc_bias(const StudyResult& res, Scenario s, int n, int time_index) {
  std::vector<double> sum;
  int count = 0;
  for (const StudyRow& row : res.rows) {
    if (!row.ok || row.scenario != s || row.n != n || row.time_index != time_index) continue;
    if (sum.empty()) sum.assign(row.auc_error.size(), 0.0);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += row.auc_error[j];
    ++count;
  }
  if (!count) return kNaN;
  double total = 0.0;
  for (double v : sum) total += std::abs(v / count);
  return total / static_cast<double>(sum.size());
}

inline double median_ermse_roc(const StudyResult& res, Scenario s, int n, int time_index) {
  std::vector<double> v;
  for (const StudyRow& row : res.rows)
    if (row.ok && row.scenario == s && row.n == n && row.time_index == time_index) v.push_back(row.ermse_roc);
  return quantile7(v, 0.5);
}

}  // namespace timeroc
