#pragma once

// Piecewise-exponential additive hazard models. Censored survival records
// are expanded into one Poisson pseudo-observation per (subject, interval),
// and the hazard GAM is fitted to those with log-exposure offsets.
//
// Every model column is a product of a subject-level feature (marker,
// covariates) and an interval-level feature (a basis in time). The design
// below keeps those two parts separate, which keeps X'WX cheap even when
// the augmented data has tens of thousands of rows.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/gam.hpp"
#include "timeroc/quadrature.hpp"
#include "timeroc/terms.hpp"

namespace timeroc {

inline constexpr const char* kTimeVariable = "t";
inline constexpr const char* kMarkerVariable = "y";

/// Right-censored records: observed time, event indicator, marker and
/// named covariates.
struct SurvivalData {
  Eigen::VectorXd z;
  Eigen::VectorXd delta;
  Eigen::VectorXd marker;
  Columns covariates;

  Eigen::Index size() const { return z.size(); }

  void validate() const {
    const Eigen::Index n = z.size();
    if (n < 1) throw Error(ErrorCode::invalid_input, "no survival records");
    if (delta.size() != n || marker.size() != n)
      throw Error(ErrorCode::invalid_input, "survival columns have different lengths");
    for (const auto& [name, col] : covariates) {
      if (name == kTimeVariable || name == kMarkerVariable)
        throw Error(ErrorCode::invalid_input, "covariate name '" + name + "' is reserved");
      if (col.size() != n) throw Error(ErrorCode::invalid_input, "covariate '" + name + "' has wrong length");
      if (!col.allFinite()) throw Error(ErrorCode::invalid_input, "covariate '" + name + "' is not finite");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(z(i) > 0) || !std::isfinite(z(i)))
        throw Error(ErrorCode::invalid_record, "record " + std::to_string(i) + ": time must be positive");
      if (delta(i) != 0.0 && delta(i) != 1.0)
        throw Error(ErrorCode::invalid_record, "record " + std::to_string(i) + ": status must be 0 or 1");
      if (!std::isfinite(marker(i)))
        throw Error(ErrorCode::invalid_record, "record " + std::to_string(i) + ": marker is not finite");
    }
  }

  SurvivalData subset(const std::vector<Eigen::Index>& idx) const {
    SurvivalData out;
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.z.resize(m);
    out.delta.resize(m);
    out.marker.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index i = idx[static_cast<std::size_t>(k)];
      out.z(k) = z(i);
      out.delta(k) = delta(i);
      out.marker(k) = marker(i);
    }
    for (const auto& [name, col] : covariates) {
      Eigen::VectorXd c(m);
      for (Eigen::Index k = 0; k < m; ++k) c(k) = col(idx[static_cast<std::size_t>(k)]);
      out.covariates[name] = std::move(c);
    }
    return out;
  }

  /// Subject-level columns: the marker under its reserved name plus covariates.
  Columns subject_columns() const {
    Columns c = covariates;
    c[kMarkerVariable] = marker;
    return c;
  }

  double censoring_fraction() const { return 1.0 - delta.mean(); }
};

struct BreakRule {
  enum class Kind { uncensored_times, equal };
  Kind kind = Kind::uncensored_times;
  int intervals = 30;
};

inline Eigen::VectorXd make_breakpoints(const SurvivalData& data, const BreakRule& rule = {}) {
  if (data.size() < 1) throw Error(ErrorCode::invalid_input, "no survival records");
  const double t_max = data.z.maxCoeff();
  std::vector<double> k{0.0};
  if (rule.kind == BreakRule::Kind::uncensored_times) {
    std::vector<double> ev;
    for (Eigen::Index i = 0; i < data.size(); ++i)
      if (data.delta(i) == 1.0) ev.push_back(data.z(i));
    if (ev.empty()) throw Error(ErrorCode::empty_breakpoints, "no uncensored times to use as break points");
    std::sort(ev.begin(), ev.end());
    ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    for (double v : ev)
      if (v > 0) k.push_back(v);
    if (t_max > k.back()) k.push_back(t_max);
  } else {
    if (rule.intervals < 1) throw Error(ErrorCode::invalid_spec, "need at least one interval");
    for (int s = 1; s < rule.intervals; ++s) k.push_back(t_max * s / rule.intervals);
    k.push_back(t_max);
  }
  return Eigen::Map<const Eigen::VectorXd>(k.data(), static_cast<Eigen::Index>(k.size()));
}

/// Pseudo-observations in subject-major order.
struct AugmentedData {
  std::vector<Eigen::Index> subject;
  std::vector<int> interval;  // 1-based s
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd t;  // kappa_s
  Eigen::VectorXd exposure;
  Eigen::VectorXd offset;
  std::vector<Eigen::Index> start;  // first row of each subject
  std::vector<int> count;           // rows per subject (k_i)

  Eigen::Index rows() const { return z_tilde.size(); }
};

inline AugmentedData augment(const SurvivalData& data, const Eigen::VectorXd& kappa) {
  if (kappa.size() < 2 || kappa(0) != 0.0) throw Error(ErrorCode::invalid_input, "break points must start at 0");
  for (Eigen::Index s = 1; s < kappa.size(); ++s)
    if (!(kappa(s) > kappa(s - 1))) throw Error(ErrorCode::invalid_input, "break points must increase strictly");
  const Eigen::Index n = data.size();
  AugmentedData a;
  a.start.resize(static_cast<std::size_t>(n));
  a.count.resize(static_cast<std::size_t>(n));
  std::vector<double> zt, tt, ex;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = data.z(i);
    if (!(z > 0)) throw Error(ErrorCode::invalid_record, "record " + std::to_string(i) + ": time must be positive");
    if (z > kappa(kappa.size() - 1))
      throw Error(ErrorCode::invalid_record, "record " + std::to_string(i) + ": time beyond last break point");
    // k_i: first interval whose right end reaches z
    const auto it = std::lower_bound(kappa.data() + 1, kappa.data() + kappa.size(), z);
    const int k = static_cast<int>(it - kappa.data());
    a.start[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(zt.size());
    a.count[static_cast<std::size_t>(i)] = k;
    for (int s = 1; s <= k; ++s) {
      const double r = s < k ? kappa(s) - kappa(s - 1) : z - kappa(s - 1);
      a.subject.push_back(i);
      a.interval.push_back(s);
      zt.push_back(s == k ? data.delta(i) : 0.0);
      tt.push_back(kappa(s));
      ex.push_back(r);
    }
  }
  const auto m = static_cast<Eigen::Index>(zt.size());
  a.z_tilde = Eigen::Map<Eigen::VectorXd>(zt.data(), m);
  a.t = Eigen::Map<Eigen::VectorXd>(tt.data(), m);
  a.exposure = Eigen::Map<Eigen::VectorXd>(ex.data(), m);
  a.offset = a.exposure.array().log().matrix();
  return a;
}

/// Row-level columns of the augmented data (time plus repeated subject values).
inline Columns augmented_columns(const SurvivalData& data, const AugmentedData& a) {
  Columns out;
  out[kTimeVariable] = a.t;
  const Columns subj = data.subject_columns();
  for (const auto& [name, col] : subj) {
    Eigen::VectorXd c(a.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) c(r) = col(a.subject[static_cast<std::size_t>(r)]);
    out[name] = std::move(c);
  }
  return out;
}

/// Splits every model column into (subject feature) x (time feature) and
/// groups columns by their time feature. Group 0 holds the columns that do
/// not depend on time (its time feature is the constant 1).
class PamLayout {
 public:
  struct Part {
    std::size_t term = 0;
    std::vector<std::size_t> subject_factors;  // indices into term.factors
    int time_factor = -1;                      // index into term.factors or -1
    bool time_first = false;
  };
  struct Group {
    int source_term = -1;  // term providing the time factor (-1 = constant)
    int source_factor = -1;
    Eigen::Index width = 1;            // number of time features
    std::vector<Eigen::Index> coefs;   // model coefficient indices, in order
    std::vector<std::size_t> members;  // indices into parts()
  };

  PamLayout() = default;

  PamLayout(ModelTerms terms, const Eigen::VectorXd& kappa, std::string time_variable = kTimeVariable)
      : terms_(std::move(terms)), time_(std::move(time_variable)) {
    groups_.emplace_back();
    if (terms_.intercept) groups_[0].coefs.push_back(0);
    const Eigen::VectorXd grid = kappa.tail(kappa.size() - 1);
    std::vector<Eigen::MatrixXd> grid_features{Eigen::MatrixXd::Ones(grid.size(), 1)};
    for (std::size_t k = 0; k < terms_.terms.size(); ++k) {
      const Term& t = terms_.terms[k];
      Part part;
      part.term = k;
      for (std::size_t f = 0; f < t.factors.size(); ++f) {
        if (t.factors[f].variable == time_) {
          if (part.time_factor >= 0) throw Error(ErrorCode::invalid_spec, "term uses time twice");
          part.time_factor = static_cast<int>(f);
          part.time_first = f == 0 && t.factors.size() == 2;
        } else {
          part.subject_factors.push_back(f);
        }
      }
      std::size_t g = 0;
      if (part.time_factor >= 0) {
        const Factor& tf = t.factors[static_cast<std::size_t>(part.time_factor)];
        const Eigen::MatrixXd feat = tf.evaluate(as_span(grid));
        g = groups_.size();
        for (std::size_t h = 1; h < groups_.size(); ++h) {
          const Factor& other = terms_.terms[static_cast<std::size_t>(groups_[h].source_term)]
                                    .factors[static_cast<std::size_t>(groups_[h].source_factor)];
          if (same_factor(tf, other) && grid_features[h].rows() == feat.rows() &&
              grid_features[h].cols() == feat.cols() && grid_features[h] == feat) {
            g = h;
            break;
          }
        }
        if (g == groups_.size()) {
          Group grp;
          grp.source_term = static_cast<int>(k);
          grp.source_factor = part.time_factor;
          grp.width = feat.cols();
          groups_.push_back(grp);
          grid_features.push_back(feat);
        }
      }
      for (Eigen::Index c = 0; c < t.cols(); ++c) groups_[g].coefs.push_back(terms_.offsets[k] + c);
      groups_[g].members.push_back(parts_.size());
      parts_.push_back(part);
    }
    offsets_.assign(groups_.size(), 0);
    Eigen::Index off = 0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      offsets_[g] = off;
      off += groups_[g].width;
    }
    width_ = off;
  }

  const ModelTerms& terms() const { return terms_; }
  const std::vector<Group>& groups() const { return groups_; }
  const std::string& time_variable() const { return time_; }
  Eigen::Index time_width() const { return width_; }
  Eigen::Index group_offset(std::size_t g) const { return offsets_[g]; }

  /// Time features of all groups at times `t` (rows) concatenated by group.
  Eigen::MatrixXd time_features(std::span<const double> t, ClampCounter* clamps = nullptr) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(t.size()), width_);
    out.col(0).setOnes();
    for (std::size_t g = 1; g < groups_.size(); ++g) {
      const Factor& f = terms_.terms[static_cast<std::size_t>(groups_[g].source_term)]
                            .factors[static_cast<std::size_t>(groups_[g].source_factor)];
      out.middleCols(offsets_[g], groups_[g].width) = f.evaluate(t, clamps);
    }
    return out;
  }

  /// Per-group subject blocks: for group g a (|coefs| x n*width) matrix
  /// whose i-th column block maps the group's coefficients to the time
  /// feature weights of subject i.
  std::vector<Eigen::MatrixXd> subject_blocks(const Columns& subjects, Eigen::Index n,
                                              ClampCounter* clamps = nullptr) const {
    std::vector<Eigen::MatrixXd> out;
    for (const Group& grp : groups_) {
      const auto rows = static_cast<Eigen::Index>(grp.coefs.size());
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rows, n * grp.width);
      Eigen::Index row = 0;
      if (&grp == &groups_[0] && terms_.intercept) {
        for (Eigen::Index i = 0; i < n; ++i) g(0, i) = 1.0;
        row = 1;
      }
      for (std::size_t m : grp.members) {
        const Part& part = parts_[m];
        const Term& t = terms_.terms[part.term];
        Eigen::MatrixXd sa = Eigen::MatrixXd::Ones(n, 1);
        if (part.subject_factors.size() == 1) {
          const Factor& f = t.factors[part.subject_factors[0]];
          sa = f.evaluate(Term::column(subjects, f.variable), clamps);
        } else if (part.subject_factors.size() == 2) {
          const Factor& f1 = t.factors[part.subject_factors[0]];
          const Factor& f2 = t.factors[part.subject_factors[1]];
          sa = row_kronecker(f1.evaluate(Term::column(subjects, f1.variable), clamps),
                             f2.evaluate(Term::column(subjects, f2.variable), clamps));
        }
        if (sa.rows() != n) throw Error(ErrorCode::invalid_input, "subject columns have wrong length");
        const Eigen::Index sw = sa.cols(), tw = grp.width, cols = t.cols();
        const Eigen::MatrixXd tt = t.transform.size() ? Eigen::MatrixXd(t.transform.transpose())
                                                      : Eigen::MatrixXd::Identity(cols, cols);
        for (Eigen::Index a = 0; a < sw; ++a) {
          for (Eigen::Index c = 0; c < tw; ++c) {
            const Eigen::Index r = part.time_first ? c * sw + a : a * tw + c;
            // columns c, c + tw, c + 2 tw, ... belong to subjects 0, 1, 2, ...
            Eigen::Map<Eigen::MatrixXd, 0, Eigen::OuterStride<>> dst(g.data() + row + c * rows, cols, n,
                                                                      Eigen::OuterStride<>(tw * rows));
            dst.noalias() += tt.col(r) * sa.col(a).transpose();
          }
        }
        row += cols;
      }
      out.push_back(std::move(g));
    }
    return out;
  }

  /// Stacked per-subject time-feature weights (time_width x n) for
  /// coefficients `beta`: eta(t) of subject i = time_features(t) * H.col(i).
  Eigen::MatrixXd subject_weights(const std::vector<Eigen::MatrixXd>& blocks, const Eigen::VectorXd& beta,
                                  Eigen::Index n) const {
    Eigen::MatrixXd h(width_, n);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      Eigen::VectorXd bg(static_cast<Eigen::Index>(groups_[g].coefs.size()));
      for (std::size_t k = 0; k < groups_[g].coefs.size(); ++k)
        bg(static_cast<Eigen::Index>(k)) = beta(groups_[g].coefs[k]);
      const Eigen::VectorXd flat = blocks[g].transpose() * bg;
      h.middleRows(offsets_[g], groups_[g].width) =
          Eigen::Map<const Eigen::MatrixXd>(flat.data(), groups_[g].width, n);
    }
    return h;
  }

 private:
  static bool same_factor(const Factor& a, const Factor& b) {
    if (a.variable != b.variable || a.is_value != b.is_value) return false;
    if (a.is_value) return true;
    if (a.basis.knots() != b.basis.knots() || a.basis.degree() != b.basis.degree()) return false;
    if (a.margin_constraint.rows() != b.margin_constraint.rows() ||
        a.margin_constraint.cols() != b.margin_constraint.cols())
      return false;
    return a.margin_constraint.size() == 0 || a.margin_constraint == b.margin_constraint;
  }

  ModelTerms terms_;
  std::string time_;
  std::vector<Part> parts_;
  std::vector<Group> groups_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index width_ = 1;
};

/// Factored design of the augmented data; rows are (subject, interval) in
/// subject-major order.
class PamDesign {
 public:
  PamDesign(const PamLayout& layout, const Columns& subjects, const Eigen::VectorXd& kappa, const AugmentedData& aug)
      : layout_(&layout), start_(aug.start), count_(aug.count) {
    n_ = static_cast<Eigen::Index>(count_.size());
    rows_ = aug.rows();
    const Eigen::VectorXd grid = kappa.tail(kappa.size() - 1);
    c_ = layout.time_features(as_span(grid));
    blocks_ = layout.subject_blocks(subjects, n_);
    p_ = layout.terms().n_coef;
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return p_; }

  Eigen::VectorXd multiply(const Eigen::VectorXd& beta) const {
    const Eigen::MatrixXd h = layout_->subject_weights(blocks_, beta, n_);
    Eigen::VectorXd eta(rows_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const auto k = count_[static_cast<std::size_t>(i)];
      eta.segment(start_[static_cast<std::size_t>(i)], k).noalias() = c_.topRows(k) * h.col(i);
    }
    return eta;
  }

  Eigen::VectorXd transpose_multiply(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd u(c_.cols(), n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const auto k = count_[static_cast<std::size_t>(i)];
      u.col(i).noalias() = c_.topRows(k).transpose() * v.segment(start_[static_cast<std::size_t>(i)], k);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p_);
    const auto& groups = layout_->groups();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const Eigen::Index w = groups[g].width;
      const Eigen::MatrixXd ug = u.middleRows(layout_->group_offset(g), w);
      const Eigen::VectorXd r = blocks_[g] * Eigen::Map<const Eigen::VectorXd>(ug.data(), w * n_);
      for (std::size_t k = 0; k < groups[g].coefs.size(); ++k) out(groups[g].coefs[k]) = r(static_cast<Eigen::Index>(k));
    }
    return out;
  }

  Eigen::MatrixXd weighted_crossprod(const Eigen::VectorXd& w) const {
    const auto& groups = layout_->groups();
    const std::size_t ng = groups.size();
    const Eigen::Index ct = c_.cols();
    std::vector<std::vector<Eigen::MatrixXd>> acc(ng, std::vector<Eigen::MatrixXd>(ng));
    for (std::size_t g = 0; g < ng; ++g)
      for (std::size_t h = g; h < ng; ++h)
        acc[g][h] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups[g].coefs.size()),
                                          static_cast<Eigen::Index>(groups[h].coefs.size()));
    Eigen::MatrixXd v(ct, ct), cw;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const auto k = count_[static_cast<std::size_t>(i)];
      const auto s0 = start_[static_cast<std::size_t>(i)];
      cw = c_.topRows(k).array().colwise() * w.segment(s0, k).array();
      v.noalias() = cw.transpose() * c_.topRows(k);
      for (std::size_t g = 0; g < ng; ++g) {
        const Eigen::Index wg = groups[g].width;
        const auto gi = blocks_[g].middleCols(i * wg, wg);
        for (std::size_t h = g; h < ng; ++h) {
          const Eigen::Index wh = groups[h].width;
          const auto hi = blocks_[h].middleCols(i * wh, wh);
          const Eigen::MatrixXd vg =
              v.block(layout_->group_offset(g), layout_->group_offset(h), wg, wh) * hi.transpose();
          acc[g][h].noalias() += gi * vg;
        }
      }
    }
    Eigen::MatrixXd out(p_, p_);
    for (std::size_t g = 0; g < ng; ++g)
      for (std::size_t h = g; h < ng; ++h)
        for (std::size_t a = 0; a < groups[g].coefs.size(); ++a)
          for (std::size_t b = 0; b < groups[h].coefs.size(); ++b) {
            const double val = acc[g][h](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            out(groups[g].coefs[a], groups[h].coefs[b]) = val;
            out(groups[h].coefs[b], groups[g].coefs[a]) = val;
          }
    return out;
  }

 private:
  const PamLayout* layout_;
  std::vector<Eigen::Index> start_;
  std::vector<int> count_;
  Eigen::Index n_ = 0, rows_ = 0, p_ = 0;
  Eigen::MatrixXd c_;
  std::vector<Eigen::MatrixXd> blocks_;
};

struct FittedHazardModel {
  FittedModel gam;
  PamLayout layout;
  Eigen::VectorXd breakpoints;
  BreakRule rule;
  double t_max = 0.0;
  std::vector<std::string> covariates;
  Eigen::Index augmented_rows = 0;
};

inline FittedHazardModel fit_hazard(const SurvivalData& data, const ModelSpec& spec, const BreakRule& rule = {},
                                    const FitOptions& options = {}) {
  data.validate();
  FittedHazardModel out;
  out.rule = rule;
  out.breakpoints = make_breakpoints(data, rule);
  out.t_max = out.breakpoints(out.breakpoints.size() - 1);
  for (const auto& [name, col] : data.covariates) out.covariates.push_back(name);
  const AugmentedData aug = augment(data, out.breakpoints);
  out.augmented_rows = aug.rows();
  BuildContext ctx;
  ctx.time_variable = kTimeVariable;
  ctx.time_origin = 0.0;
  ModelTerms terms;
  {
    const Columns cols = augmented_columns(data, aug);
    terms = build_model_terms(spec, cols, ctx);
  }
  out.layout = PamLayout(terms, out.breakpoints);
  const PamDesign design(out.layout, data.subject_columns(), out.breakpoints, aug);
  out.gam = fit_design(design, std::move(terms), aug.z_tilde, aug.offset, Family::poisson_log, options);
  return out;
}

/// Log-hazard of a batch of subjects at a batch of times (times x subjects).
class HazardSurface {
 public:
  HazardSurface(const FittedHazardModel& model, const Columns& subjects, ClampCounter* clamps = nullptr)
      : model_(&model) {
    const auto it = subjects.find(kMarkerVariable);
    n_ = it != subjects.end() ? it->second.size() : (subjects.empty() ? 1 : subjects.begin()->second.size());
    const auto blocks = model.layout.subject_blocks(subjects, n_, clamps);
    h_ = model.layout.subject_weights(blocks, model.gam.coefficients, n_);
  }

  Eigen::Index subjects() const { return n_; }

  Eigen::MatrixXd log_hazard(std::span<const double> t, ClampCounter* clamps = nullptr) const {
    std::vector<double> tc(t.begin(), t.end());
    for (double& v : tc) {
      if (v < 0.0 || v > model_->t_max) {
        if (clamps) clamps->add();
        v = std::clamp(v, 0.0, model_->t_max);
      }
    }
    return model_->layout.time_features(tc) * h_;
  }

  /// Cumulative hazard of every subject at horizon t by composite Simpson,
  /// doubling the panel count until every subject's value changes by less
  /// than `rel_tol` (relative), starting at `n0` panels, capped at `cap`.
  Eigen::VectorXd cumulative_hazard(double t, int n0 = 50, double rel_tol = 1e-6, int cap = 6400,
                                    ClampCounter* clamps = nullptr) const {
    if (t <= 0.0) return Eigen::VectorXd::Zero(n_);
    auto integrate = [&](int n) {
      std::vector<double> nodes(static_cast<std::size_t>(n + 1));
      for (int k = 0; k <= n; ++k) nodes[static_cast<std::size_t>(k)] = t * k / n;
      nodes.back() = t;
      const std::vector<double> w = simpson_weights(0.0, t, n);
      const Eigen::MatrixXd haz = log_hazard(nodes, clamps).array().exp();
      return Eigen::VectorXd(haz.transpose() * Eigen::Map<const Eigen::VectorXd>(w.data(), n + 1));
    };
    int n = n0;
    Eigen::VectorXd prev = integrate(n);
    while (n < cap) {
      n *= 2;
      Eigen::VectorXd next = integrate(n);
      const double change = ((next - prev).array().abs() / next.array().abs().max(1e-300)).maxCoeff();
      prev = std::move(next);
      if (change < rel_tol) break;
    }
    return prev;
  }

 private:
  const FittedHazardModel* model_;
  Eigen::Index n_ = 0;
  Eigen::MatrixXd h_;
};

inline Columns single_subject(double y, const Columns& x) {
  Columns c;
  for (const auto& [name, v] : x) c[name] = Eigen::VectorXd::Constant(1, v.size() ? v(0) : 0.0);
  c[kMarkerVariable] = Eigen::VectorXd::Constant(1, y);
  return c;
}

inline double hazard_at(const FittedHazardModel& model, double t, double y, const Columns& x,
                        ClampCounter* clamps = nullptr) {
  const HazardSurface hs(model, single_subject(y, x), clamps);
  const double tt[1] = {t};
  return std::exp(hs.log_hazard(tt, clamps)(0, 0));
}

inline double survival(const FittedHazardModel& model, double t, double y, const Columns& x, int n_simpson = 50,
                       ClampCounter* clamps = nullptr) {
  if (n_simpson < 2 || n_simpson % 2) throw Error(ErrorCode::invalid_grid, "Simpson panel count must be even");
  if (t <= 0.0) return 1.0;
  const HazardSurface hs(model, single_subject(y, x), clamps);
  return std::exp(-hs.cumulative_hazard(t, n_simpson, 1e-6, 6400, clamps)(0));
}

}  // namespace timeroc
