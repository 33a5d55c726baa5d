// Acceptance run: one PASS/FAIL/SKIPPED line per criterion, nonzero exit if
// any criterion that ran failed.
//
// Environment:
//   TIMEROC_ACCEPT_ONLY=1,6,9        run a subset
//   TIMEROC_ACCEPT_REPLICATES=N      replicates for the study criterion (default 100)
//   TIMEROC_ACCEPT_COVERAGE=1        enable the bootstrap-coverage criterion
//   TIMEROC_COVERAGE_RUNS / _BOOT    reduced coverage run (reported as INFO, not PASS)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "timeroc/timeroc.hpp"

using namespace timeroc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Status { pass, fail, skipped, info } status = fail;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::atoi(v) : fallback;
}

Eigen::VectorXd uniform(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

Eigen::VectorXd normal(std::mt19937_64& rng, Eigen::Index n, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> z(mean, sd);
  Eigen::VectorXd v(n);
  for (auto& e : v) e = z(rng);
  return v;
}

TermSpec smooth(const std::string& v, int J) {
  TermSpec t;
  t.kind = TermKind::smooth1d;
  t.variables = {v};
  t.dimension = J;
  return t;
}

TermSpec linear(const std::string& v) {
  TermSpec t;
  t.kind = TermKind::linear;
  t.variables = {v};
  return t;
}

BasisSpec basis(int J, KnotRule rule, double lo, double hi, int degree = 3, int r = 2) {
  BasisSpec s;
  s.dimension = J;
  s.degree = degree;
  s.penalty_order = r;
  s.lo = lo;
  s.hi = hi;
  s.knot_rule = rule;
  return s;
}

// ---------------------------------------------------------------------------
// 1. spline algebra

Outcome spline_suite() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  double pou = 0.0, null_form = 0.0;
  int rank_mismatch = 0;
  const Eigen::VectorXd x = uniform(rng, 400, -2.0, 3.0);
  for (KnotRule rule : {KnotRule::equidistant, KnotRule::quantile}) {
    for (int degree = 0; degree <= 4; ++degree) {
      const BSplineBasis b(basis(10, rule, x.minCoeff(), x.maxCoeff(), degree, 1), as_span(x));
      const Eigen::VectorXd probe = Eigen::VectorXd::LinSpaced(1001, x.minCoeff(), x.maxCoeff());
      const Eigen::MatrixXd d = b.design(as_span(probe));
      pou = std::max(pou, (d.rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
    for (int r = 1; r <= 3; ++r) {
      const BSplineBasis b(basis(12, rule, x.minCoeff(), x.maxCoeff(), 3, r), as_span(x));
      const Eigen::MatrixXd root = b.penalty_root();
      const Eigen::VectorXd g = b.greville();
      const Eigen::VectorXd u = (g.array() - g(0)) / (g(g.size() - 1) - g(0));
      for (int deg = 0; deg < r; ++deg)
        null_form = std::max(null_form, (root * Eigen::VectorXd(u.array().pow(deg))).squaredNorm());
    }
  }
  // rank(P1 (x) I) = rank(P1) * J2 and likewise for the second margin
  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(60, 0.0, 1.0);
  for (int J1 : {5, 6, 8})
    for (int J2 : {5, 7})
      for (int r : {1, 2}) {
        TensorSpec ts;
        ts.margin1 = basis(J1, KnotRule::equidistant, 0, 1, 3, r);
        ts.margin2 = basis(J2, KnotRule::equidistant, 0, 1, 3, r);
        const BasisBlock te = build_tensor(as_span(s), as_span(s), ts);
        if (te.rank_of_penalty(0) != (J1 - r) * J2 || te.rank_of_penalty(1) != J1 * (J2 - r)) ++rank_mismatch;
      }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome o;
  o.status = pou <= 1e-12 && null_form <= 1e-20 && rank_mismatch == 0 && secs < 5.0 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("partition of unity %.2e (<=1e-12), null-space form %.2e (<=1e-20), rank mismatches %d, %.2f s (<5)",
                 pou, null_form, rank_mismatch, secs);
  return o;
}

// ---------------------------------------------------------------------------
// 2. GLM oracle

Eigen::VectorXd newton_poisson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& o,
                               const Eigen::MatrixXd& s) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta + o;
    return (y.array() * eta.array() - eta.array().exp()).sum() - 0.5 * beta.dot(s * beta);
  };
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd mu = (x * b + o).array().exp();
    const Eigen::VectorXd g = x.transpose() * (y - mu) - s * b;
    const Eigen::MatrixXd h = x.transpose() * mu.asDiagonal() * x + s;
    const Eigen::VectorXd step = h.ldlt().solve(g);
    double f = 1.0;
    while (objective(b + f * step) < objective(b) && f > 1e-10) f *= 0.5;
    b += f * step;
    if (step.norm() * f < 1e-14) break;
  }
  return b;
}

Outcome glm_oracle() {
  std::mt19937_64 rng(11);
  const Eigen::Index n = 100;
  Columns data;
  data["x1"] = uniform(rng, n, -1, 1);
  data["x2"] = normal(rng, n);
  const Eigen::VectorXd offset = uniform(rng, n, -0.5, 0.5);
  const Eigen::VectorXd eta =
      (0.5 + 0.8 * data["x1"].array() + (data["x2"].array() * 1.3).sin() * 0.7).matrix() + offset;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = std::poisson_distribution<int>(std::exp(eta(i)))(rng);

  ModelSpec glm;
  glm.terms = {linear("x1"), linear("x2")};
  const FittedModel m0 = fit(glm, data, y, Family::poisson_log, {}, offset);
  Eigen::MatrixXd x(n, 3);
  x << Eigen::VectorXd::Ones(n), data.at("x1"), data.at("x2");
  const double d0 = (m0.coefficients - newton_poisson(x, y, offset, Eigen::MatrixXd::Zero(3, 3))).cwiseAbs().maxCoeff();

  ModelSpec pen;
  pen.terms = {smooth("x2", 8)};
  FitOptions opt;
  opt.fixed_lambda = Eigen::VectorXd::Constant(1, 3.0);
  const FittedModel m1 = fit(pen, data, y, Family::poisson_log, opt, offset);
  const Eigen::MatrixXd xs = m1.terms.design(data);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(xs.cols(), xs.cols());
  s.bottomRightCorner(xs.cols() - 1, xs.cols() - 1) = 3.0 * m1.terms.terms[0].penalties[0];
  const double d1 = (m1.coefficients - newton_poisson(xs, y, offset, s)).cwiseAbs().maxCoeff();

  Outcome o;
  o.status = d0 <= 1e-6 && d1 <= 1e-6 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("lambda=0 max|diff| %.2e, smooth at lambda=3 max|diff| %.2e (<=1e-6)", d0, d1);
  return o;
}

// ---------------------------------------------------------------------------
// 3. PAM likelihood

SurvivalData exponential_data(std::mt19937_64& rng, Eigen::Index n) {
  SurvivalData d;
  const Eigen::VectorXd x = uniform(rng, n, -1.0, 1.0);
  d.marker = normal(rng, n);
  d.z.resize(n);
  d.delta.resize(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = std::exp(-1.0 + 0.5 * x(i) + 0.3 * d.marker(i));
    const double t = -std::log(1.0 - u(rng)) / rate;
    const double c = 4.0 * u(rng) + 1e-9;
    d.z(i) = std::min(t, c);
    d.delta(i) = t <= c ? 1.0 : 0.0;
  }
  d.covariates["x"] = x;
  return d;
}

Outcome pam_equivalence() {
  std::mt19937_64 rng(5);
  const SurvivalData d = exponential_data(rng, 20);
  const Eigen::VectorXd kappa = make_breakpoints(d);
  const AugmentedData a = augment(d, kappa);
  ModelSpec spec;
  spec.terms = {smooth("t", 6), linear("x"), linear("y")};
  const Columns cols = augmented_columns(d, a);
  const Eigen::MatrixXd x = build_model_terms(spec, cols).design(cols);
  const Eigen::VectorXd eta = x * normal(rng, x.cols(), 0.0, 0.3);
  double pois = 0.0, extra = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double lin = eta(r) + a.offset(r);
    pois += a.z_tilde(r) * lin - std::exp(lin);
    extra += a.z_tilde(r) * std::log(a.exposure(r));
  }
  // censored-survival log-likelihood: delta log h(z) - integral of h up to z
  double surv = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double cum = 0.0, last = 0.0;
    for (Eigen::Index s = 1; s < kappa.size() && kappa(s - 1) < d.z(i); ++s) {
      const Eigen::Index r = a.start[static_cast<std::size_t>(i)] + s - 1;
      cum += std::exp(eta(r)) * (std::min(kappa(s), d.z(i)) - kappa(s - 1));
      last = eta(r);
    }
    surv += d.delta(i) * last - cum;
  }
  const double dl = std::abs(pois - (surv + extra));

  std::mt19937_64 rng2(3);
  const SurvivalData e = exponential_data(rng2, 400);
  const FittedHazardModel m = fit_hazard(e, ModelSpec{});
  const double oe = e.delta.sum() / e.z.sum();
  const double dr = std::abs(std::exp(m.gam.intercept()) - oe);

  Outcome o;
  o.status = dl <= 1e-10 && dr <= 1e-8 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("log-likelihood |diff| %.2e (<=1e-10, 20 subjects), intercept-only rate |diff| %.2e (<=1e-8)", dl, dr);
  return o;
}

// ---------------------------------------------------------------------------
// 4. survival quadrature

Outcome survival_quadrature() {
  double dconst = 0.0;
  // fitted piecewise-constant model with a single rate
  std::mt19937_64 rng(3);
  const SurvivalData e = exponential_data(rng, 400);
  const FittedHazardModel m = fit_hazard(e, ModelSpec{});
  const double lambda = std::exp(m.gam.intercept());
  const Columns x{{"x", Eigen::VectorXd::Constant(1, 0.2)}};
  for (double t : {0.01, 0.3, 1.3, 3.0}) dconst = std::max(dconst, std::abs(survival(m, t, 0.0, x) - std::exp(-lambda * t)));
  // simulation generator with unit hazard
  ScenarioSpec c;
  c.constant_hazard = true;
  for (double t : {0.01, 0.5, 2.0, 7.0}) dconst = std::max(dconst, std::abs(true_survival(c, t, 0.3, 1.0) - std::exp(-t)));

  ScenarioSpec s;
  double dquad = 0.0;
  for (double t : {0.015, 0.05, 0.1, 0.5})
    for (double y : {-2.0, 0.0, 1.0, 4.0})
      for (double xv : {-1.0, 1.0, 3.0}) {
        auto f = [&](double u) { return std::exp(log_hazard(s, u, y, xv)); };
        const double fine = composite_simpson(f, 0.0, t, 40000);
        dquad = std::max(dquad, std::abs(true_survival(s, t, y, xv) - std::exp(-fine)));
      }
  Outcome o;
  o.status = dconst <= 1e-9 && dquad <= 1e-6 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("constant hazard max|diff| %.2e (<=1e-9), scenario I vs refined quadrature %.2e (<=1e-6)", dconst,
                 dquad);
  return o;
}

// ---------------------------------------------------------------------------
// 5. ROC structure

SurvivalData informative(std::mt19937_64& rng, Eigen::Index n) {
  SurvivalData d;
  const Eigen::VectorXd x = normal(rng, n, 1.0, 1.0);
  d.marker = x + normal(rng, n);
  d.z.resize(n);
  d.delta.resize(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = std::exp(-1.0 + 0.8 * d.marker(i));
    const double t = -std::log(1.0 - u(rng)) / rate;
    const double c = 3.0 * u(rng) + 1e-6;
    d.z(i) = std::min(t, c);
    d.delta(i) = t <= c ? 1.0 : 0.0;
  }
  d.covariates["x"] = x;
  return d;
}

Outcome roc_structure() {
  auto config = [](bool marker_terms) {
    FitConfig c;
    c.hazard.terms = {smooth("t", 6), smooth("x", 6)};
    if (marker_terms) c.hazard.terms.push_back(smooth("y", 6));
    c.marker.mean.terms = {smooth("x", 8)};
    c.marker.logsq.terms = {smooth("x", 8)};
    return c;
  };
  RocRequest req;
  req.times = {0.3, 0.8, 1.5};
  for (double v : {0.0, 1.0, 2.0}) req.xs.push_back(CovariatePoint{{"x", v}});

  std::mt19937_64 rng(42);
  const SurvivalData d = informative(rng, 250);
  const FittedPair f = fit_models(d, config(true));
  const RocSurface s = evaluate_roc(f.hazard, f.marker, req);
  int violations = 0;
  for (const RocCell& c : s.cells) {
    for (std::size_t l = 0; l < c.se.size(); ++l) {
      for (double v : {c.se[l], c.sp[l]})
        if (!(v >= 0.0 && v <= 1.0)) ++violations;
      if (l && (c.se[l] > c.se[l - 1] || c.sp[l] < c.sp[l - 1])) ++violations;
    }
    for (std::size_t k = 0; k < c.roc.size(); ++k) {
      if (!(c.roc[k] >= 0.0 && c.roc[k] <= 1.0)) ++violations;
      if (k && c.roc[k] < c.roc[k - 1]) ++violations;
    }
    if (!(c.auc >= 0.0 && c.auc <= 1.0)) ++violations;
  }

  std::mt19937_64 rng2(43);
  const SurvivalData d2 = informative(rng2, 200);
  const FittedPair f2 = fit_models(d2, config(false));
  const RocSurface s2 = evaluate_roc(f2.hazard, f2.marker, req);
  double diag = 0.0, half = 0.0;
  for (const RocCell& c : s2.cells) {
    for (std::size_t k = 0; k < c.roc.size(); ++k) diag = std::max(diag, std::abs(c.roc[k] - s2.p_grid[k]));
    half = std::max(half, std::abs(c.auc - 0.5));
  }

  const std::vector<double> p = default_p_grid();
  std::vector<double> lin, quad;
  for (double v : p) {
    lin.push_back(v);
    quad.push_back(v * v);
  }
  const double simpson = std::max(std::abs(auc(lin, p) - 0.5), std::abs(auc(quad, p) - 1.0 / 3.0));

  Outcome o;
  o.status = violations == 0 && diag <= 1e-10 && half <= 1e-10 && simpson <= 1e-12 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("monotonicity/range violations %d, uninformative ROC-p %.2e and AUC-0.5 %.2e (<=1e-10), Simpson %.2e "
                 "(<=1e-12)",
                 violations, diag, half, simpson);
  return o;
}

// ---------------------------------------------------------------------------
// 6. true AUC against a counting oracle

double g2(double x) { return 0.5 * std::sin(2.0 * (x + 1.5)); }

// Event time from the closed-form cumulative hazard e^c ((t+0.2)^(k+1) - 0.2^(k+1)) / (k+1).
double closed_form_time(Scenario id, double e, double y, double x) {
  double k = 1.0, c = 0.0;
  switch (id) {
    case Scenario::I: c = 2.0 + y + 0.1 * x; break;
    case Scenario::II: c = 2.0 + y * y * y / 20.0 + g2(x); break;
    case Scenario::III:
      k = y * y * y / 20.0;
      c = 2.0 * k + g2(x);
      break;
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double k1 = k + 1.0;
  if (k1 == 0.0) return 0.2 * std::exp(e * std::exp(-c)) - 0.2;
  const double rhs = std::pow(0.2, k1) + k1 * e * std::exp(-c);
  if (rhs <= 0.0) return inf;
  return std::pow(rhs, 1.0 / k1) - 0.2;
}

double counting_auc(Scenario id, double t, double x, int draws, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::vector<std::pair<double, bool>> d(static_cast<std::size_t>(draws));
  long cases = 0;
  for (auto& r : d) {
    const double y = x + z(rng);
    r = {y, closed_form_time(id, expo(rng), y, x) <= t};
    cases += r.second;
  }
  std::sort(d.begin(), d.end());
  double pairs = 0.0;
  long controls_below = 0;
  for (const auto& r : d) {
    if (r.second)
      pairs += static_cast<double>(controls_below);
    else
      ++controls_below;
  }
  return pairs / (static_cast<double>(cases) * static_cast<double>(draws - cases));
}

Outcome monte_carlo_auc() {
  std::mt19937_64 pick(606);
  std::uniform_int_distribution<int> sc(0, 2), q(0, 2);
  std::uniform_real_distribution<double> ux(-1.0, 3.0);
  double worst = 0.0;
  std::string cells;
  for (int i = 0; i < 10; ++i) {
    ScenarioSpec s;
    s.id = static_cast<Scenario>(sc(pick));
    const double t = s.quartiles()[static_cast<std::size_t>(q(pick))];
    const double x = ux(pick);
    std::mt19937_64 rng = replicate_rng(606, static_cast<std::uint64_t>(i), 0x6d63);
    const double mc = counting_auc(s.id, t, x, 1000000, rng);
    const double truth = true_auc(s, t, x);
    worst = std::max(worst, std::abs(mc - truth));
    cells += fmt(" %s/t=%g/x=%.2f:%.4f", std::string(to_string(s.id)).c_str(), t, x, mc - truth);
  }
  Outcome o;
  o.status = worst <= 0.003 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("max|true - counting| %.4f (<=0.003) over 10 triples;", worst) + cells;
  return o;
}

// ---------------------------------------------------------------------------
// 7. simulation study

Outcome study() {
  StudyConfig cfg;
  cfg.replicates = env_int("TIMEROC_ACCEPT_REPLICATES", 100);
  cfg.sizes = {300, 600};
  const StudyResult res = run_study(cfg);
  bool ok = true;
  std::string text = fmt("%d replicates, %d failed;", cfg.replicates, res.failed_replicates);
  for (Scenario s : cfg.scenarios) {
    text += fmt(" %s bias", std::string(to_string(s)).c_str());
    for (int q = 0; q < 3; ++q) {
      const double b = mean_abs_auc_bias(res, s, 600, q);
      ok = ok && b < 0.05;
      text += fmt(" %.4f", b);
    }
    text += " ermse300->600";
    for (int q = 0; q < 3; ++q) {
      const double e3 = median_ermse_roc(res, s, 300, q), e6 = median_ermse_roc(res, s, 600, q);
      ok = ok && std::isfinite(e3) && std::isfinite(e6) && e6 < e3;
      text += fmt(" %.4f>%.4f", e3, e6);
    }
    text += ";";
  }
  if (cfg.replicates != 100) {
    Outcome o;
    o.status = Outcome::info;
    o.detail = "reduced run, not the criterion: " + text;
    return o;
  }
  Outcome o;
  o.status = ok ? Outcome::pass : Outcome::fail;
  o.detail = text + " (bias < 0.05 at n=600, median ERMSE decreasing)";
  return o;
}

// ---------------------------------------------------------------------------
// 8. bootstrap coverage

Outcome coverage() {
  if (env_int("TIMEROC_ACCEPT_COVERAGE", 0) != 1) {
    Outcome o;
    o.status = Outcome::skipped;
    o.detail = "opt-in: set TIMEROC_ACCEPT_COVERAGE=1 (100 runs x 200 bootstrap refits)";
    return o;
  }
  const int runs = env_int("TIMEROC_COVERAGE_RUNS", 100), boot = env_int("TIMEROC_COVERAGE_BOOT", 200);
  const CensoringCalibration cal = calibrate_censoring(Scenario::I);
  ScenarioSpec s;
  s.a = cal.a;
  s.b = cal.b;
  const double t = s.quartiles()[0];
  const std::vector<double> xs{0.0, 1.0, 2.0};
  std::vector<double> truth;
  for (double x : xs) truth.push_back(true_auc(s, t, x));
  const FitConfig cfg = simulation_fit_config();
  RocRequest req;
  req.times = {t};
  for (double x : xs) req.xs.push_back(CovariatePoint{{"x", x}});
  std::vector<int> covered(xs.size(), 0);
  int used = 0, failed = 0;
  for (int r = 0; r < runs; ++r) {
    try {
      std::mt19937_64 rng = replicate_rng(8, static_cast<std::uint64_t>(r), study_stream(Scenario::I, 300));
      const SurvivalData d = generate_detailed(s, 300, rng).data;
      const FittedPair f = fit_models(d, cfg);
      RocSurface surface = evaluate_roc(f.hazard, f.marker, req);
      BootstrapOptions opt;
      opt.replicates = boot;
      opt.seed = static_cast<std::uint64_t>(r) + 1;
      opt.roc_bands = false;
      bootstrap_bands(d, cfg, req, surface, opt);
      for (std::size_t j = 0; j < xs.size(); ++j) {
        const RocCell& c = surface.cells[j];
        if (c.auc_lower <= truth[j] && truth[j] <= c.auc_upper) ++covered[j];
      }
      ++used;
    } catch (const std::exception&) {
      ++failed;
    }
    std::fprintf(stderr, "coverage run %d/%d\n", r + 1, runs);
  }
  bool ok = used > 0;
  std::string text = fmt("%d runs (%d failed) x %d bootstrap;", used, failed, boot);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double cov = used ? static_cast<double>(covered[j]) / used : kNaN;
    ok = ok && cov >= 0.90;
    text += fmt(" x=%g coverage %.3f", xs[j], cov);
  }
  Outcome o;
  if (runs != 100 || boot != 200) {
    o.status = Outcome::info;
    o.detail = "reduced run, not the criterion: " + text;
    return o;
  }
  o.status = ok ? Outcome::pass : Outcome::fail;
  o.detail = text + " (>= 0.90)";
  return o;
}

// ---------------------------------------------------------------------------
// 9. determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("timeroc_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  ScenarioSpec s;
  s.a = s.b = 0.0853;
  {
    std::ofstream f(dir / "data.csv");
    write_survival_csv(f, generate(s, 300, 17));
  }
  const std::string data = (dir / "data.csv").string();
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"fit --input " + data, {"model.json"}},
      {"roc --input " + data + " --xgrid x=0,1,2 --boot 8 --seed 5", {"roc.csv", "sesp.csv", "auc.csv"}},
      {"generate --scenario III --n 200 --seed 3", {"data.csv"}},
      {"simulate --scenario II --sizes 120 --replicates 2 --calibration-draws 5000", {"study.csv"}},
  };
  int mismatches = 0, failures = 0, compared = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<fs::path> outs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / fmt("c%zu_%d", c, rep);
      const std::string cmd = std::string(TIMEROC_CLI) + " " + commands[c].first + " --out " + out.string() +
                              " >/dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) ++failures;
      outs.push_back(out);
    }
    for (const std::string& f : commands[c].second) {
      const std::string a = slurp(outs[0] / f), b = slurp(outs[1] / f);
      ++compared;
      if (a.empty() || a != b) ++mismatches;
    }
  }
  fs::remove_all(dir);
  Outcome o;
  o.status = mismatches == 0 && failures == 0 ? Outcome::pass : Outcome::fail;
  o.detail = fmt("%d output files over %zu commands, %d differ, %d command failures", compared, commands.size(),
                 mismatches, failures);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"spline algebra suite", spline_suite},
      {"GLM oracle equivalence", glm_oracle},
      {"PAM likelihood equivalence", pam_equivalence},
      {"survival quadrature", survival_quadrature},
      {"ROC structural suite", roc_structure},
      {"true AUC vs Monte-Carlo counting oracle", monte_carlo_auc},
      {"scenario study (n=300/600)", study},
      {"bootstrap coverage", coverage},
      {"determinism", determinism},
  };
  std::set<int> only;
  if (const char* v = std::getenv("TIMEROC_ACCEPT_ONLY")) {
    std::stringstream ss(v);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) only.insert(std::stoi(tok));
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.status = Outcome::fail;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    static const char* label[] = {"PASS", "FAIL", "SKIPPED", "INFO"};
    std::printf("[%s] criterion %d: %s -- %s [%.1f s]\n", label[o.status], id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (o.status == Outcome::fail) ++failed;
  }
  return failed ? 1 : 0;
}
