#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "test_util.hpp"
#include "timeroc/roc.hpp"

using namespace timeroc;

namespace {

TermSpec smooth(const std::string& v, int J) {
  TermSpec t;
  t.kind = TermKind::smooth1d;
  t.variables = {v};
  t.dimension = J;
  return t;
}

// X ~ N(1,1), Y ~ N(X,1), constant hazard exp(-1 + 0.8 y), uniform censoring.
SurvivalData informative(std::mt19937_64& rng, Eigen::Index n) {
  SurvivalData d;
  const Eigen::VectorXd x = testutil::normal(rng, n, 1.0, 1.0);
  d.marker = x + testutil::normal(rng, n);
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

FitConfig config(bool marker_terms = true) {
  FitConfig c;
  c.hazard.terms = {smooth("t", 6), smooth("x", 6)};
  if (marker_terms) c.hazard.terms.push_back(smooth("y", 6));
  c.marker.mean.terms = {smooth("x", 8)};
  c.marker.logsq.terms = {smooth("x", 8)};
  return c;
}

struct Fixture {
  SurvivalData data;
  FittedPair fit;
};

const Fixture& shared() {
  static const Fixture f = [] {
    std::mt19937_64 rng(42);
    Fixture r;
    r.data = informative(rng, 250);
    r.fit = fit_models(r.data, config());
    return r;
  }();
  return f;
}

CovariatePoint px(double v) { return CovariatePoint{{"x", v}}; }

}  // namespace

TEST(Auc, SimpsonExactOnPolynomials) {
  const std::vector<double> p = default_p_grid();
  std::vector<double> lin, quad;
  for (double v : p) {
    lin.push_back(v);
    quad.push_back(v * v);
  }
  EXPECT_NEAR(auc(lin, p), 0.5, 1e-12);
  EXPECT_NEAR(auc(quad, p), 1.0 / 3.0, 1e-12);
}

TEST(Auc, StepAgainstTrapezoid) {
  const std::vector<double> p = default_p_grid();
  std::vector<double> step(p.size(), 1.0);
  step[0] = 0.0;
  EXPECT_NEAR(auc(step, p), trapezoid_auc(step, p), 0.01);
}

TEST(Auc, GridValidation) {
  const std::vector<double> p = default_p_grid(100);
  try {
    auc(std::vector<double>(100, 0.5), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_grid);
  }
  EXPECT_THROW(auc(std::vector<double>{0.0, 0.4, 1.0}, std::vector<double>{0.0, 0.3, 1.0}), Error);
  EXPECT_THROW(auc(std::vector<double>{0.0, 1.0}, default_p_grid()), Error);
}

TEST(RocCurve, InterpolationEndpointsAndShape) {
  const std::vector<double> se{1.0, 0.8, 0.5, 0.1, 0.0}, sp{0.0, 0.4, 0.7, 0.95, 1.0};
  const std::vector<double> p = default_p_grid();
  const std::vector<double> r = interpolate_roc(se, sp, p);
  EXPECT_EQ(r.front(), 0.0);
  EXPECT_EQ(r.back(), 1.0);
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_GE(r[k], r[k - 1]);
  // midway between (0.3, 0.5) and (0.6, 0.8)
  EXPECT_NEAR(r[45], 0.65, 1e-12);
  // undefined inputs propagate
  const std::vector<double> bad = interpolate_roc({kNaN}, {0.5}, p);
  EXPECT_TRUE(std::isnan(bad[50]));
}

TEST(AtomWeights, MatchesDirectSums) {
  const Fixture& f = shared();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ut(0.1, 2.5), uv(-3.0, 5.0), ux(-1.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double t = ut(rng), v = uv(rng);
    const CovariatePoint x = px(ux(rng));
    const AtomWeights w = atom_weights(f.fit.hazard, f.fit.marker, {t}, x)[0];
    double num_se = 0, den_se = 0, num_sp = 0, den_sp = 0;
    for (Eigen::Index i = 0; i < w.atoms.size(); ++i) {
      const double s = w.survival(i);
      den_se += 1 - s;
      den_sp += s;
      if (w.atoms(i) > v) num_se += 1 - s;
      if (w.atoms(i) <= v) num_sp += s;
      EXPECT_DOUBLE_EQ((1 - s) + s, 1.0);
    }
    EXPECT_NEAR(w.sensitivity(v), num_se / den_se, 1e-12);
    EXPECT_NEAR(w.specificity(v), num_sp / den_sp, 1e-12);
    EXPECT_NEAR(sensitivity(f.fit.hazard, f.fit.marker, t, v, x), num_se / den_se, 1e-12);
    EXPECT_NEAR(specificity(f.fit.hazard, f.fit.marker, t, v, x), num_sp / den_sp, 1e-12);
  }
}

TEST(AtomWeights, ExtremeThresholds) {
  const Fixture& f = shared();
  const AtomWeights w = atom_weights(f.fit.hazard, f.fit.marker, {1.0}, px(1.0))[0];
  const double below = w.atoms(0) - 1.0, above = w.atoms(w.atoms.size() - 1) + 1.0;
  EXPECT_EQ(w.sensitivity(below), 1.0);
  EXPECT_EQ(w.specificity(below), 0.0);
  EXPECT_EQ(w.sensitivity(above), 0.0);
  EXPECT_EQ(w.specificity(above), 1.0);
}

TEST(RocSurfaceTest, StructuralProperties) {
  const Fixture& f = shared();
  RocRequest req;
  req.times = {0.3, 0.8, 1.5};
  req.xs = {px(0.0), px(1.0), px(2.0)};
  const RocSurface s = evaluate_roc(f.fit.hazard, f.fit.marker, req);
  ASSERT_EQ(s.cells.size(), 9u);
  EXPECT_EQ(s.thresholds.size(), 200u);
  for (const RocCell& c : s.cells) {
    ASSERT_TRUE(c.defined);
    for (std::size_t l = 0; l < c.se.size(); ++l) {
      EXPECT_GE(c.se[l], 0.0);
      EXPECT_LE(c.se[l], 1.0);
      EXPECT_GE(c.sp[l], 0.0);
      EXPECT_LE(c.sp[l], 1.0);
      if (l) {
        EXPECT_LE(c.se[l], c.se[l - 1]);
        EXPECT_GE(c.sp[l], c.sp[l - 1]);
      }
    }
    // widened default grid reaches both extremes
    EXPECT_EQ(c.se.front(), 1.0);
    EXPECT_EQ(c.sp.back(), 1.0);
    for (std::size_t k = 1; k < c.roc.size(); ++k) EXPECT_GE(c.roc[k], c.roc[k - 1]);
    EXPECT_EQ(c.roc.front(), 0.0);
    EXPECT_EQ(c.roc.back(), 1.0);
    EXPECT_GT(c.auc, 0.5);
    EXPECT_LE(c.auc, 1.0);
    EXPECT_LT(std::abs(c.auc - trapezoid_auc(c.roc, s.p_grid)), 0.005);
  }
  EXPECT_EQ(&s.cell(1, 2, 3), &s.cells[5]);
  EXPECT_EQ(s.cell(1, 2, 3).t, 0.8);
}

TEST(RocSurfaceTest, UninformativeMarkerIsDiagonal) {
  std::mt19937_64 rng(43);
  const SurvivalData d = informative(rng, 200);
  const FittedPair fit = fit_models(d, config(false));
  RocRequest req;
  req.times = {0.5, 1.0};
  req.xs = {px(0.5), px(1.5)};
  const RocSurface s = evaluate_roc(fit.hazard, fit.marker, req);
  for (const RocCell& c : s.cells) {
    for (std::size_t k = 0; k < c.roc.size(); ++k) EXPECT_NEAR(c.roc[k], s.p_grid[k], 1e-10);
    EXPECT_NEAR(c.auc, 0.5, 1e-10);
  }
}

TEST(RocSurfaceTest, UndefinedSensitivityIsMissing) {
  const Fixture& f = shared();
  RocRequest req;
  req.times = {1e-22, 1.0};
  req.xs = {px(1.0)};
  const RocSurface s = evaluate_roc(f.fit.hazard, f.fit.marker, req);
  EXPECT_FALSE(s.cells[0].defined);
  EXPECT_TRUE(std::isnan(s.cells[0].auc));
  EXPECT_TRUE(std::isnan(s.cells[0].se[10]));
  EXPECT_TRUE(s.cells[1].defined);
  bool warned = false;
  for (const auto& w : s.warnings) warned |= w.rfind("undefined-sensitivity", 0) == 0;
  EXPECT_TRUE(warned);
  try {
    sensitivity(f.fit.hazard, f.fit.marker, 1e-22, 0.0, px(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::undefined_sensitivity);
  }
}

TEST(RocSurfaceTest, RequestValidation) {
  const Fixture& f = shared();
  RocRequest req;
  EXPECT_THROW(evaluate_roc(f.fit.hazard, f.fit.marker, req), Error);
  req.times = {1.0};
  req.thresholds = {0.0, -1.0};
  EXPECT_THROW(evaluate_roc(f.fit.hazard, f.fit.marker, req), Error);
}

TEST(Quantile, Type7) {
  EXPECT_DOUBLE_EQ(quantile7({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile7({4.0, 1.0, 3.0, 2.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile7({4.0, 1.0, 3.0, 2.0}, 1.0), 4.0);
  EXPECT_NEAR(quantile7({1.0, 2.0, 3.0, 4.0, 10.0}, 0.9), 7.6, 1e-12);
}

TEST(Bootstrap, IdenticalResamplesGiveZeroWidth) {
  const Fixture& f = shared();
  RocRequest req;
  req.times = {0.8};
  req.xs = {px(1.0)};
  RocSurface s = evaluate_roc(f.fit.hazard, f.fit.marker, req);
  BootstrapOptions opt;
  opt.replicates = 2;
  opt.resampler = [](std::size_t, Eigen::Index n) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = (i * 7) % n;
    return idx;
  };
  bootstrap_bands(f.data, config(), req, s, opt);
  EXPECT_EQ(s.cells[0].auc_lower, s.cells[0].auc_upper);
  for (std::size_t k = 0; k < s.p_grid.size(); ++k) EXPECT_EQ(s.cells[0].roc_lower[k], s.cells[0].roc_upper[k]);
}

TEST(Bootstrap, BandsOrderedAndDeterministic) {
  const Fixture& f = shared();
  RocRequest req;
  req.times = {0.8};
  req.xs = {px(0.0), px(2.0)};
  BootstrapOptions opt;
  opt.replicates = 9;
  opt.seed = 77;
  RocSurface a = evaluate_roc(f.fit.hazard, f.fit.marker, req);
  RocSurface b = a;
  const BootstrapSummary sa = bootstrap_bands(f.data, config(), req, a, opt);
  ::setenv("TIMEROC_THREADS", "3", 1);
  bootstrap_bands(f.data, config(), req, b, opt);
  ::unsetenv("TIMEROC_THREADS");
  EXPECT_EQ(sa.failed, 0);
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    const std::vector<double>& reps = sa.auc_replicates[c];
    ASSERT_EQ(reps.size(), 9u);
    EXPECT_LE(a.cells[c].auc_lower, quantile7(reps, 0.5));
    EXPECT_GE(a.cells[c].auc_upper, quantile7(reps, 0.5));
    EXPECT_EQ(a.cells[c].auc_lower, b.cells[c].auc_lower);
    EXPECT_EQ(a.cells[c].auc_upper, b.cells[c].auc_upper);
    EXPECT_EQ(a.cells[c].roc_lower, b.cells[c].roc_lower);
  }
}

TEST(Bootstrap, FailedReplicatesCountedOrRejected) {
  const Fixture& f = shared();
  RocRequest req;
  req.times = {0.8};
  req.xs = {px(1.0)};
  // resamples drawn only from censored records cannot form break points
  std::vector<Eigen::Index> censored;
  for (Eigen::Index i = 0; i < f.data.size(); ++i)
    if (f.data.delta(i) == 0.0) censored.push_back(i);
  auto sampler = [&](int bad_every) {
    return [&, bad_every](std::size_t b, Eigen::Index n) {
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
      std::mt19937_64 rng(b);
      for (auto& i : idx) {
        if (b % static_cast<std::size_t>(bad_every) == 0)
          i = censored[std::uniform_int_distribution<std::size_t>(0, censored.size() - 1)(rng)];
        else
          i = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
      }
      return idx;
    };
  };
  RocSurface s = evaluate_roc(f.fit.hazard, f.fit.marker, req);
  BootstrapOptions opt;
  opt.replicates = 10;
  opt.roc_bands = false;
  opt.resampler = sampler(10);  // replicate 0 fails
  const BootstrapSummary ok = bootstrap_bands(f.data, config(), req, s, opt);
  EXPECT_EQ(ok.failed, 1);
  EXPECT_EQ(ok.auc_replicates[0].size(), 9u);
  EXPECT_NE(ok.failures[0].find("empty-breakpoints"), std::string::npos);
  opt.resampler = sampler(3);  // replicates 0, 3, 6, 9 fail
  try {
    bootstrap_bands(f.data, config(), req, s, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bootstrap_unreliable);
  }
}
