#pragma once

// Penalised additive models: Poisson (log link, offset) and Gaussian
// (identity link). Coefficients come from penalised IRLS at fixed smoothing
// parameters; the smoothing parameters are chosen in an outer loop on the
// log scale by REML, GCV or AIC.
//
// The design is a template parameter so that the piecewise-exponential
// model can supply a factored design without ever forming its rows. A
// design must provide rows(), cols(), multiply(beta),
// transpose_multiply(v) and weighted_crossprod(w).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/optimize.hpp"
#include "timeroc/terms.hpp"

namespace timeroc {

enum class Family { poisson_log, gaussian_identity };
enum class Criterion { reml, gcv, aic };
enum class Optimizer { automatic, nelder_mead, fellner_schall };

inline std::string_view to_string(Family f) {
  return f == Family::poisson_log ? "poisson_log" : "gaussian_identity";
}
inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::reml: return "reml";
    case Criterion::gcv: return "gcv";
    case Criterion::aic: return "aic";
  }
  return "reml";
}

inline constexpr double kLogLambdaMin = -20.0;
inline constexpr double kLogLambdaMax = 25.0;

struct FitOptions {
  Criterion selection = Criterion::reml;
  bool double_penalty = false;
  Optimizer optimizer = Optimizer::automatic;
  // Smoothing parameters on the natural scale, one per penalty; zero allowed.
  std::optional<Eigen::VectorXd> fixed_lambda;
  std::optional<Eigen::VectorXd> initial_log_lambda;
  double pirls_tolerance = 1e-8;
  int max_pirls_iterations = 200;
  int max_outer_iterations = 200;
};

struct PenaltyInfo {
  std::string label;
  std::size_t term = 0;
  bool null_space = false;
};

struct FittedModel {
  Family family = Family::gaussian_identity;
  Criterion selection = Criterion::reml;
  bool double_penalty = false;
  ModelTerms terms;
  std::vector<PenaltyInfo> penalties;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd log_lambda;
  Eigen::VectorXd term_edf;  // one entry per term
  double edf = 0.0;
  double deviance = 0.0;
  double loglik = 0.0;
  double scale = 1.0;
  double reml = 0.0;
  double gcv = 0.0;
  double aic = 0.0;
  Eigen::Index n = 0;
  bool converged = false;
  int pirls_iterations = 0;
  int outer_iterations = 0;
  std::vector<double> penalized_loglik_trace;  // last inner fit

  double intercept() const { return terms.intercept ? coefficients(0) : 0.0; }

  Eigen::VectorXd term_coefficients(std::size_t k) const {
    return coefficients.segment(terms.offsets.at(k), terms.terms.at(k).cols());
  }
};

/// Plain dense design matrix.
struct DenseDesign {
  Eigen::MatrixXd x;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  Eigen::VectorXd multiply(const Eigen::VectorXd& beta) const { return x * beta; }
  Eigen::VectorXd transpose_multiply(const Eigen::VectorXd& v) const { return x.transpose() * v; }
  Eigen::MatrixXd weighted_crossprod(const Eigen::VectorXd& w) const {
    const Eigen::MatrixXd xw = x.array().colwise() * w.array().sqrt();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    out.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose());
    return out.selfadjointView<Eigen::Lower>();
  }
};

/// All penalties of a model, grouped into per-term blocks. Log-determinants
/// and generalised-inverse traces of S = sum_j lambda_j S_j are computed per
/// block; when the block's penalties commute they are diagonalised once and
/// these quantities become exact sums.
class PenaltySet {
 public:
  struct Block {
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
    std::vector<int> members;
    Eigen::Index rank = 0;
    bool diagonal = false;
    Eigen::MatrixXd basis;               // eigenvectors (diagonal) or range basis (general)
    std::vector<Eigen::VectorXd> diags;  // per member, diagonal mode only
    std::vector<bool> in_range;          // diagonal mode only
  };

  PenaltySet() = default;

  PenaltySet(const ModelTerms& terms, bool double_penalty) : n_coef_(terms.n_coef) {
    for (std::size_t k = 0; k < terms.terms.size(); ++k) {
      const Term& t = terms.terms[k];
      if (!t.penalized()) continue;
      Block b;
      b.offset = terms.offsets[k];
      b.size = t.cols();
      for (std::size_t j = 0; j < t.penalties.size(); ++j) {
        b.members.push_back(static_cast<int>(matrices_.size()));
        matrices_.push_back(t.penalties[j]);
        const std::string suffix = t.penalties.size() > 1 ? "#" + std::to_string(j + 1) : "";
        info_.push_back({t.label + suffix, k, false});
      }
      if (double_penalty && t.null_penalty) {
        b.members.push_back(static_cast<int>(matrices_.size()));
        matrices_.push_back(*t.null_penalty);
        info_.push_back({t.label + "#null", k, true});
      }
      analyse(b);
      blocks_.push_back(std::move(b));
    }
    Eigen::Index r = 0;
    for (const auto& b : blocks_) r += b.rank;
    null_dim_ = n_coef_ - r;
  }

  int size() const { return static_cast<int>(matrices_.size()); }
  Eigen::Index null_dim() const { return null_dim_; }
  const std::vector<PenaltyInfo>& info() const { return info_; }
  const Eigen::MatrixXd& matrix(int j) const { return matrices_[static_cast<std::size_t>(j)]; }
  const std::vector<Block>& blocks() const { return blocks_; }

  Eigen::Index offset_of(int j) const {
    for (const auto& b : blocks_)
      for (int m : b.members)
        if (m == j) return b.offset;
    return 0;
  }

  Eigen::MatrixXd total(const Eigen::VectorXd& lambda) const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_coef_, n_coef_);
    for (const auto& b : blocks_)
      for (int m : b.members) s.block(b.offset, b.offset, b.size, b.size) += lambda(m) * matrix(m);
    return s;
  }

  double quadratic(int j, const Eigen::VectorXd& beta) const {
    const Eigen::Index off = offset_of(j);
    const Eigen::MatrixXd& m = matrix(j);
    const auto seg = beta.segment(off, m.rows());
    return seg.dot(m * seg);
  }

  /// log|S|_+ and tr(S^- S_j) for every penalty j.
  struct LogDet {
    double value = 0.0;
    Eigen::VectorXd trace;
  };

  LogDet log_det(const Eigen::VectorXd& lambda) const {
    LogDet out;
    out.trace = Eigen::VectorXd::Zero(size());
    for (const auto& b : blocks_) {
      if (b.diagonal) {
        for (Eigen::Index k = 0; k < b.size; ++k) {
          if (!b.in_range[static_cast<std::size_t>(k)]) continue;
          double e = 0.0;
          for (std::size_t q = 0; q < b.members.size(); ++q) e += lambda(b.members[q]) * b.diags[q](k);
          out.value += std::log(e);
          for (std::size_t q = 0; q < b.members.size(); ++q) out.trace(b.members[q]) += b.diags[q](k) / e;
        }
      } else {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(b.rank, b.rank);
        for (int m : b.members) s += lambda(m) * (b.basis.transpose() * matrix(m) * b.basis);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
        out.value += ldlt.vectorD().array().abs().log().sum();
        const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(b.rank, b.rank));
        for (int m : b.members)
          out.trace(m) += (inv * (b.basis.transpose() * matrix(m) * b.basis)).trace();
      }
    }
    return out;
  }

 private:
  void analyse(Block& b) const {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(b.size, b.size);
    // irrational-ish weights so that distinct eigen-pairs stay distinct
    for (std::size_t q = 0; q < b.members.size(); ++q) {
      const Eigen::MatrixXd& m = matrix(b.members[q]);
      const double norm = std::max(m.norm(), 1e-300);
      sum += m / norm * (1.0 / (1.0 + 0.6180339887 * static_cast<double>(q)));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sum);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double tol = 1e-9 * std::max(ev.maxCoeff(), 1e-300);
    b.rank = (ev.array() > tol).count();
    b.diagonal = true;
    b.diags.clear();
    for (int m : b.members) {
      const Eigen::MatrixXd d = es.eigenvectors().transpose() * matrix(m) * es.eigenvectors();
      const Eigen::VectorXd diag = d.diagonal();
      const double off = (d - Eigen::MatrixXd(diag.asDiagonal())).cwiseAbs().maxCoeff();
      if (off > 1e-8 * std::max(matrix(m).cwiseAbs().maxCoeff(), 1e-300)) b.diagonal = false;
      b.diags.push_back(diag.cwiseMax(0.0));
    }
    b.in_range.assign(static_cast<std::size_t>(b.size), false);
    for (Eigen::Index k = 0; k < b.size; ++k) b.in_range[static_cast<std::size_t>(k)] = ev(k) > tol;
    if (b.diagonal) {
      b.basis = es.eigenvectors();
    } else {
      b.diags.clear();
      b.basis = es.eigenvectors().rightCols(b.rank);
    }
  }

  Eigen::Index n_coef_ = 0;
  Eigen::Index null_dim_ = 0;
  std::vector<Eigen::MatrixXd> matrices_;
  std::vector<PenaltyInfo> info_;
  std::vector<Block> blocks_;
};

namespace detail {

inline double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta, const Eigen::VectorXd& mu) {
  double l = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) l += y(i) * eta(i) - mu(i) - std::lgamma(y(i) + 1.0);
  return l;
}

inline double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double yi = y(i);
    d += (yi > 0 ? yi * std::log(yi / mu(i)) : 0.0) - (yi - mu(i));
  }
  return 2.0 * d;
}

/// Cholesky of a penalised Hessian. A ridge of 1e-10 (relative to the
/// largest unpenalised diagonal entry) is added only when the plain
/// factorisation fails.
inline Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& h, const Eigen::MatrixXd& s) {
  Eigen::MatrixXd m = h + s;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  double ridge = 1e-10 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  while (llt.info() != Eigen::Success && ridge < 1e10) {
    m.diagonal().array() += ridge;
    llt.compute(m);
    ridge *= 10.0;
  }
  return llt;
}

/// Result of the inner (fixed smoothing parameter) fit.
struct Inner {
  Eigen::VectorXd beta;
  Eigen::VectorXd eta;  // includes offset
  Eigen::MatrixXd hessian;  // X'WX at beta
  Eigen::LLT<Eigen::MatrixXd> chol;  // of X'WX + S (+ ridge)
  double loglik = 0.0;
  double deviance = 0.0;
  double penalty = 0.0;  // beta' S beta
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;
};

template <class D>
Inner pirls_poisson(const D& x, const Eigen::VectorXd& y, const Eigen::VectorXd& offset, const Eigen::MatrixXd& s,
                    Eigen::VectorXd beta, const FitOptions& opt) {
  Inner r;
  auto loglik_at = [&](const Eigen::VectorXd& b, Eigen::VectorXd& eta, Eigen::VectorXd& mu) {
    eta = x.multiply(b) + offset;
    mu = eta.array().exp().matrix();
    return poisson_loglik(y, eta, mu);
  };
  Eigen::VectorXd eta, mu;
  double ll = loglik_at(beta, eta, mu);
  double lp = ll - 0.5 * beta.dot(s * beta);
  if (!std::isfinite(lp)) throw Error(ErrorCode::no_convergence, "non-finite starting likelihood");
  r.trace.push_back(lp);
  double rel_change = std::numeric_limits<double>::infinity();
  int stalls = 0;
  for (int it = 0;; ++it) {
    r.hessian = x.weighted_crossprod(mu);
    const Eigen::VectorXd grad = x.transpose_multiply(y - mu) - s * beta;
    const double gnorm = grad.cwiseAbs().maxCoeff();
    const double bnorm = beta.size() ? beta.cwiseAbs().maxCoeff() : 0.0;
    const bool grad_ok = gnorm < 1e-6 * (1.0 + bnorm);
    r.chol = factorize(r.hessian, s);
    r.iterations = it;
    const Eigen::VectorXd delta = r.chol.solve(grad);
    // Newton decrement: unlike the raw gradient it is not swamped by
    // rounding in S beta when some smoothing parameters are huge
    const double decrement = grad.dot(delta);
    const bool small_step = decrement < 1e-12 * (std::abs(lp) + 1.0);
    if ((it > 0 && rel_change < opt.pirls_tolerance && (grad_ok || small_step)) || gnorm < 1e-10 * (1.0 + bnorm) ||
        decrement < 1e-20 * (std::abs(lp) + 1.0)) {
      r.converged = true;
      break;
    }
    if (it >= opt.max_pirls_iterations) break;
    // The penalty change is taken in difference form; beta'S beta itself
    // carries rounding far above the gains near the optimum.
    const Eigen::VectorXd sd = s * delta;
    const double b_sd = beta.dot(sd), d_sd = delta.dot(sd);
    double step = 1.0;
    bool improved = false;
    Eigen::VectorXd trial_beta, trial_eta, trial_mu;
    for (int h = 0; h < 60; ++h) {
      trial_beta = beta + step * delta;
      const double trial_ll = loglik_at(trial_beta, trial_eta, trial_mu);
      const double gain = (trial_ll - ll) - (step * b_sd + 0.5 * step * step * d_sd);
      if (std::isfinite(gain) && gain >= -1e-13 * std::abs(lp)) {
        improved = true;
        rel_change = std::abs(gain) / (std::abs(lp) + 0.1);
        stalls = gain > 0 ? 0 : stalls + 1;
        ll = trial_ll;
        lp += gain;
        break;
      }
      step *= 0.5;
      // predicted gain below rounding noise: halving further is futile
      if (step * decrement < 1e-13 * (std::abs(lp) + 1.0)) break;
    }
    if (!improved || stalls >= 2) {
      // no ascent direction left at working precision; accept when the
      // predicted gain is itself within the relative tolerance
      const bool tiny_gain = 0.5 * decrement < opt.pirls_tolerance * (std::abs(lp) + 0.1);
      r.converged = grad_ok || small_step || tiny_gain || rel_change < opt.pirls_tolerance;
      if (improved) {
        beta = trial_beta;
        eta = trial_eta;
        mu = trial_mu;
      }
      break;
    }
    beta = trial_beta;
    eta = trial_eta;
    mu = trial_mu;
    r.trace.push_back(lp);
  }
  r.beta = beta;
  r.eta = eta;
  r.loglik = poisson_loglik(y, eta, mu);
  r.deviance = poisson_deviance(y, mu);
  r.penalty = beta.dot(s * beta);
  return r;
}

/// Gaussian fits are a single penalised least-squares solve; X'X and X'z
/// are computed once per model and passed in.
template <class D>
Inner solve_gaussian(const D& x, const Eigen::VectorXd& z, const Eigen::VectorXd& offset, const Eigen::MatrixXd& xtx,
                     const Eigen::VectorXd& xtz, const Eigen::MatrixXd& s) {
  Inner r;
  r.hessian = xtx;
  r.chol = factorize(xtx, s);
  if constexpr (std::is_same_v<D, DenseDesign>) {
    // QR of [X; sqrt(S)] keeps heavily penalised fits accurate
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::Index p = x.cols();
    Eigen::MatrixXd aug(x.rows() + p, p);
    aug.topRows(x.rows()) = x.x;
    aug.bottomRows(p) = ev.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(x.rows() + p);
    rhs.head(x.rows()) = z;
    r.beta = aug.colPivHouseholderQr().solve(rhs);
  } else {
    r.beta = r.chol.solve(xtz);
  }
  const Eigen::VectorXd fitted = x.multiply(r.beta);
  r.eta = fitted + offset;
  r.deviance = (z - fitted).squaredNorm();
  r.penalty = r.beta.dot(s * r.beta);
  r.loglik = -0.5 * r.deviance;
  r.converged = r.chol.info() == Eigen::Success;
  r.iterations = 1;
  r.trace = {-0.5 * (r.deviance + r.penalty)};
  return r;
}

inline double log_det_chol(const Eigen::LLT<Eigen::MatrixXd>& chol) {
  return 2.0 * chol.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Fits a penalised GLM on an arbitrary design with a prepared term set.
template <class D>
FittedModel fit_design(const D& x, ModelTerms terms, const Eigen::VectorXd& y, const Eigen::VectorXd& offset_in,
                       Family family, const FitOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 1) throw Error(ErrorCode::invalid_input, "no observations");
  if (y.size() != n) throw Error(ErrorCode::invalid_input, "response length does not match design");
  if (!y.allFinite()) throw Error(ErrorCode::invalid_input, "non-finite response");
  if (family == Family::poisson_log)
    for (Eigen::Index i = 0; i < n; ++i)
      if (y(i) < 0 || y(i) != std::floor(y(i)))
        throw Error(ErrorCode::invalid_input, "Poisson response must be non-negative integers");
  const Eigen::VectorXd offset = offset_in.size() ? offset_in : Eigen::VectorXd::Zero(n);
  if (offset.size() != n) throw Error(ErrorCode::invalid_input, "offset length does not match design");
  if (!offset.allFinite()) throw Error(ErrorCode::invalid_input, "non-finite offset");

  const PenaltySet pen(terms, opt.double_penalty);
  const int q = pen.size();

  FittedModel out;
  out.family = family;
  out.selection = opt.selection;
  out.double_penalty = opt.double_penalty;
  out.penalties = pen.info();
  out.n = n;

  // Gaussian cross-products do not depend on the smoothing parameters.
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xtz, z;
  if (family == Family::gaussian_identity) {
    z = y - offset;
    xtx = x.weighted_crossprod(Eigen::VectorXd::Ones(n));
    xtz = x.transpose_multiply(z);
  }

  Eigen::VectorXd warm;
  auto lambda_of = [&](const Eigen::VectorXd& rho) { return Eigen::VectorXd(rho.array().exp()); };

  auto inner = [&](const Eigen::VectorXd& lambda) {
    const Eigen::MatrixXd s = pen.total(lambda);
    if (family == Family::gaussian_identity) return detail::solve_gaussian(x, z, offset, xtx, xtz, s);
    if (warm.size() != p) {
      // weighted least squares on log(y + 0.1) as starting point
      const Eigen::VectorXd w = (y.array() + 0.1).matrix();
      const Eigen::VectorXd work = (w.array().log() - offset.array()).matrix();
      warm = detail::factorize(x.weighted_crossprod(w), s).solve(x.transpose_multiply((w.array() * work.array()).matrix()));
    }
    detail::Inner r = detail::pirls_poisson(x, y, offset, s, warm, opt);
    if (r.beta.allFinite()) warm = r.beta;
    return r;
  };

  struct Scores {
    double reml, gcv, aic, edf, scale;
    Eigen::VectorXd term_edf;
  };
  auto score = [&](const detail::Inner& r, const Eigen::VectorXd& lambda) {
    Scores sc{};
    const Eigen::MatrixXd a = r.chol.solve(r.hessian);
    sc.edf = a.trace();
    sc.term_edf = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(terms.terms.size()));
    for (std::size_t k = 0; k < terms.terms.size(); ++k)
      sc.term_edf(static_cast<Eigen::Index>(k)) =
          a.diagonal().segment(terms.offsets[k], terms.terms[k].cols()).sum();
    const double ldh = detail::log_det_chol(r.chol);
    const double lds = q ? pen.log_det(lambda).value : 0.0;
    const double mp = static_cast<double>(pen.null_dim());
    const double nd = static_cast<double>(n);
    if (family == Family::gaussian_identity) {
      const double rssp = r.deviance + r.penalty;
      sc.scale = rssp / std::max(nd - mp, 1.0);
      sc.reml = rssp / (2.0 * sc.scale) + 0.5 * (nd - mp) * std::log(2.0 * std::numbers::pi * sc.scale) +
                0.5 * ldh - 0.5 * lds;
    } else {
      sc.scale = 1.0;
      sc.reml = -r.loglik + 0.5 * r.penalty + 0.5 * ldh - 0.5 * lds - 0.5 * mp * std::log(2.0 * std::numbers::pi);
    }
    sc.gcv = sc.edf < nd * (1.0 - 1e-9) ? nd * r.deviance / ((nd - sc.edf) * (nd - sc.edf))
                         : std::numeric_limits<double>::quiet_NaN();
    sc.aic = r.deviance + 2.0 * sc.edf;
    return sc;
  };
  auto pick = [&](const Scores& sc) {
    switch (opt.selection) {
      case Criterion::reml: return sc.reml;
      case Criterion::gcv: return std::isfinite(sc.gcv) ? sc.gcv : std::numeric_limits<double>::infinity();
      case Criterion::aic: return sc.aic;
    }
    return sc.reml;
  };

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(q);
  int outer = 0;

  if (q == 0) {
    // nothing to select
  } else if (opt.fixed_lambda) {
    if (opt.fixed_lambda->size() != q) throw Error(ErrorCode::invalid_input, "fixed_lambda has wrong length");
    if ((opt.fixed_lambda->array() < 0).any()) throw Error(ErrorCode::invalid_input, "negative smoothing parameter");
    lambda = *opt.fixed_lambda;
  } else {
    Optimizer method = opt.optimizer;
    if (method == Optimizer::automatic)
      method = (family == Family::poisson_log && opt.selection == Criterion::reml) ? Optimizer::fellner_schall
                                                                                   : Optimizer::nelder_mead;
    if (method == Optimizer::fellner_schall && opt.selection != Criterion::reml)
      throw Error(ErrorCode::invalid_spec, "Fellner-Schall updates only apply to REML");

    auto clamp_rho = [](Eigen::VectorXd rho) {
      return Eigen::VectorXd(rho.cwiseMax(kLogLambdaMin).cwiseMin(kLogLambdaMax));
    };

    if (method == Optimizer::nelder_mead) {
      auto objective = [&](const Eigen::VectorXd& rho) {
        ++outer;
        const detail::Inner r = inner(lambda_of(rho));
        if (!r.converged) return std::numeric_limits<double>::infinity();
        return pick(score(r, lambda_of(rho)));
      };
      Eigen::VectorXd start;
      if (opt.initial_log_lambda) {
        if (opt.initial_log_lambda->size() != q)
          throw Error(ErrorCode::invalid_input, "initial_log_lambda has wrong length");
        start = clamp_rho(*opt.initial_log_lambda);
      } else {
        // coarse grid over log10(lambda) in [-3, 7]: full for up to two
        // parameters, along the diagonal otherwise
        std::vector<double> g;
        for (int k = 0; k < 7; ++k) g.push_back((-3.0 + 10.0 * k / 6.0) * std::numbers::ln10);
        double best = std::numeric_limits<double>::infinity();
        start = Eigen::VectorXd::Constant(q, g[3]);
        auto consider = [&](const Eigen::VectorXd& rho) {
          const double v = objective(rho);
          if (v < best) {
            best = v;
            start = rho;
          }
        };
        if (q == 1) {
          for (double a : g) consider(Eigen::VectorXd::Constant(1, a));
        } else if (q == 2) {
          for (double a : g)
            for (double b : g) consider((Eigen::VectorXd(2) << a, b).finished());
        } else {
          for (double a : g) consider(Eigen::VectorXd::Constant(q, a));
        }
      }
      NelderMeadOptions nm;
      nm.initial_step = 0.5 * 10.0 / 6.0 * std::numbers::ln10;
      nm.lower = kLogLambdaMin;
      nm.upper = kLogLambdaMax;
      nm.f_tolerance = 1e-9;
      nm.x_tolerance = 1e-4;
      nm.max_evaluations = std::max(opt.max_outer_iterations, 100 * q);
      const NelderMeadResult res = nelder_mead(objective, start, nm);
      lambda = lambda_of(res.x);
    } else {
      // Fellner-Schall fixed point: lambda_j <- lambda_j * phi *
      // (tr(S^- S_j) - tr((H+S)^-1 S_j)) / (beta' S_j beta)
      Eigen::VectorXd rho;
      if (opt.initial_log_lambda) {
        if (opt.initial_log_lambda->size() != q)
          throw Error(ErrorCode::invalid_input, "initial_log_lambda has wrong length");
        rho = clamp_rho(*opt.initial_log_lambda);
      } else {
        const Eigen::VectorXd mu0 = (y.array() + 0.1).matrix();
        const Eigen::MatrixXd h0 = x.weighted_crossprod(mu0);
        rho.resize(q);
        for (int j = 0; j < q; ++j) {
          const Eigen::Index off = pen.offset_of(j);
          const Eigen::MatrixXd& m = pen.matrix(j);
          const double hd = h0.diagonal().segment(off, m.rows()).mean();
          double sd = 0.0;
          int cnt = 0;
          for (Eigen::Index k = 0; k < m.rows(); ++k)
            if (m(k, k) > 1e-12 * m.diagonal().maxCoeff()) {
              sd += m(k, k);
              ++cnt;
            }
          rho(j) = std::log(std::max(hd, 1e-12) / std::max(sd / std::max(cnt, 1), 1e-300));
        }
        rho = clamp_rho(rho);
      }
      detail::Inner r = inner(lambda_of(rho));
      Scores sc = score(r, lambda_of(rho));
      Eigen::VectorXd previous = Eigen::VectorXd::Zero(q), accel = Eigen::VectorXd::Ones(q);
      for (int it = 0; it < opt.max_outer_iterations; ++it) {
        ++outer;
        const Eigen::VectorXd lam = lambda_of(rho);
        const Eigen::MatrixXd vinv = r.chol.solve(Eigen::MatrixXd::Identity(p, p));
        const PenaltySet::LogDet ld = pen.log_det(lam);
        Eigen::VectorXd step(q);
        bool done = true;
        for (int j = 0; j < q; ++j) {
          const Eigen::Index off = pen.offset_of(j);
          const Eigen::MatrixXd& m = pen.matrix(j);
          const double tr_v = (vinv.block(off, off, m.rows(), m.rows()) * m).trace();
          const double a = ld.trace(j) - tr_v;
          const double b = pen.quadratic(j, r.beta);
          double d;
          if (b <= 1e-300 || a <= 0.0)
            d = b <= 1e-300 ? 5.0 : -5.0;
          else
            d = std::log(sc.scale * a / b);
          d = std::clamp(d, -5.0, 5.0);
          if ((rho(j) >= kLogLambdaMax && d > 0) || (rho(j) <= kLogLambdaMin && d < 0)) d = 0.0;
          if (std::abs(d) > 1e-4) done = false;
          // The plain update crawls when a parameter drifts monotonically
          // (typically towards an infinite smoothing parameter); repeated
          // same-sign updates are therefore extrapolated geometrically.
          if (d * previous(j) > 0.0)
            accel(j) = std::min(2.0 * accel(j), 64.0);
          else
            accel(j) = 1.0;
          previous(j) = d;
          step(j) = std::clamp(d * accel(j), -5.0, 5.0);
        }
        if (done) break;
        double factor = 1.0;
        bool accepted = false;
        for (int h = 0; h < 8; ++h) {
          const Eigen::VectorXd trial = clamp_rho(rho + factor * step);
          detail::Inner tr_fit = inner(lambda_of(trial));
          if (tr_fit.converged) {
            const Scores tsc = score(tr_fit, lambda_of(trial));
            if (tsc.reml <= sc.reml + 1e-9 * (1.0 + std::abs(sc.reml))) {
              const double change = sc.reml - tsc.reml;
              const double move = (trial - rho).cwiseAbs().maxCoeff();
              rho = trial;
              r = std::move(tr_fit);
              sc = tsc;
              accepted = true;
              if (change < 1e-10 * (1.0 + std::abs(sc.reml)) && move < 1e-3) done = true;
              break;
            }
          }
          factor *= 0.5;
          accel.setOnes();
        }
        if (!accepted || done) break;
      }
      lambda = lambda_of(rho);
    }
  }

  const detail::Inner r = inner(lambda);
  if (!r.converged) throw Error(ErrorCode::no_convergence, "penalised IRLS did not converge");
  const Scores sc = score(r, lambda);
  out.terms = std::move(terms);
  out.coefficients = r.beta;
  out.log_lambda = lambda.array().log().matrix();
  out.term_edf = sc.term_edf;
  out.edf = sc.edf;
  out.deviance = r.deviance;
  out.loglik = r.loglik;
  out.scale = sc.scale;
  out.reml = sc.reml;
  out.gcv = sc.gcv;
  out.aic = sc.aic;
  out.converged = r.converged;
  out.pirls_iterations = r.iterations;
  out.outer_iterations = outer;
  out.penalized_loglik_trace = r.trace;
  return out;
}

/// Builds the terms from `data` and fits with a dense design.
inline FittedModel fit(const ModelSpec& spec, const Columns& data, const Eigen::VectorXd& y, Family family,
                       const FitOptions& opt = {}, const Eigen::VectorXd& offset = {},
                       const BuildContext& ctx = {}) {
  ModelTerms terms = build_model_terms(spec, data, ctx);
  DenseDesign x{!terms.variables().empty() ? terms.design(data)
                                           : Eigen::MatrixXd::Ones(y.size(), terms.intercept ? 1 : 0)};
  return fit_design(x, std::move(terms), y, offset, family, opt);
}

inline Eigen::VectorXd predict_eta(const FittedModel& model, const Columns& newdata, ClampCounter* clamps = nullptr) {
  const Eigen::Index n = model.terms.rows_of(newdata);
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, model.intercept());
  for (std::size_t k = 0; k < model.terms.terms.size(); ++k) {
    const Eigen::VectorXd c = model.terms.terms[k].contribution(newdata, model.term_coefficients(k), clamps);
    if (c.size() != n) throw Error(ErrorCode::invalid_input, "variables have different lengths");
    eta += c;
  }
  return eta;
}

inline double criterion_value(const FittedModel& model, Criterion which) {
  switch (which) {
    case Criterion::reml: return model.reml;
    case Criterion::aic: return model.aic;
    case Criterion::gcv:
      if (!std::isfinite(model.gcv))
        throw Error(ErrorCode::degenerate_gcv, "effective degrees of freedom reach the sample size");
      return model.gcv;
  }
  return model.reml;
}

}  // namespace timeroc
