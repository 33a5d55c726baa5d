#pragma once

// Model terms bound to named variables. A term is a Kronecker product of at
// most two single-variable factors (a raw value or a B-spline basis),
// optionally followed by a linear constraint transform. The factor
// structure is what allows survival evaluation on (time x marker) grids and
// the compact piecewise-exponential design to avoid materialising rows.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timeroc/error.hpp"
#include "timeroc/spline_basis.hpp"

namespace timeroc {

using Columns = std::map<std::string, Eigen::VectorXd, std::less<>>;

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

enum class TermKind { linear, smooth1d, smooth2d, varying };

struct TermSpec {
  TermKind kind = TermKind::smooth1d;
  // linear / smooth1d: {v}; smooth2d: {v1, v2}; varying: {by, v}
  std::vector<std::string> variables;
  int dimension = 10;
  int penalty_order = 2;
  int degree = 3;
  std::optional<KnotRule> knot_rule;
  // smooth2d only: constrain each margin instead of the full product, so
  // the term carries no main effects (ANOVA-style interaction).
  bool interaction_only = false;
  std::string label;
};

struct ModelSpec {
  bool intercept = true;
  std::vector<TermSpec> terms;
};

/// How the time variable (if any) is treated when building bases.
struct BuildContext {
  std::string time_variable = "t";
  double time_origin = 0.0;
};

struct Factor {
  std::string variable;
  bool is_value = false;
  BSplineBasis basis;
  Eigen::MatrixXd margin_constraint;  // empty when unconstrained

  Eigen::Index cols() const {
    if (is_value) return 1;
    return margin_constraint.size() ? margin_constraint.cols() : basis.dimension();
  }

  Eigen::MatrixXd evaluate(std::span<const double> v, ClampCounter* clamps = nullptr) const {
    if (is_value) {
      Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), 1);
      for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = v[i];
      return out;
    }
    Eigen::MatrixXd b = basis.design(v, clamps);
    if (margin_constraint.size()) return b * margin_constraint;
    return b;
  }
};

struct Term {
  TermSpec spec;
  std::string label;
  std::vector<Factor> factors;  // one or two
  Eigen::MatrixXd transform;    // raw_cols x cols, empty = identity
  std::vector<Eigen::MatrixXd> penalties;
  std::optional<Eigen::MatrixXd> null_penalty;

  Eigen::Index raw_cols() const {
    Eigen::Index c = 1;
    for (const auto& f : factors) c *= f.cols();
    return c;
  }
  Eigen::Index cols() const { return transform.size() ? transform.cols() : raw_cols(); }
  bool penalized() const { return !penalties.empty(); }

  bool uses(std::string_view variable) const {
    for (const auto& f : factors)
      if (f.variable == variable) return true;
    return false;
  }

  /// Maps constrained coefficients to coefficients of the raw Kronecker basis.
  Eigen::VectorXd raw_coefficients(const Eigen::VectorXd& theta) const {
    return transform.size() ? Eigen::VectorXd(transform * theta) : theta;
  }

  Eigen::MatrixXd raw_design(const Columns& data, ClampCounter* clamps = nullptr) const {
    std::vector<Eigen::MatrixXd> f;
    for (const auto& factor : factors) f.push_back(factor.evaluate(column(data, factor.variable), clamps));
    return f.size() == 1 ? f[0] : row_kronecker(f[0], f[1]);
  }

  Eigen::MatrixXd design(const Columns& data, ClampCounter* clamps = nullptr) const {
    Eigen::MatrixXd raw = raw_design(data, clamps);
    return transform.size() ? Eigen::MatrixXd(raw * transform) : raw;
  }

  /// Contribution of the term to the linear predictor at each row of `data`.
  Eigen::VectorXd contribution(const Columns& data, const Eigen::VectorXd& theta,
                               ClampCounter* clamps = nullptr) const {
    const Eigen::VectorXd raw = raw_coefficients(theta);
    if (factors.size() == 1) return factors[0].evaluate(column(data, factors[0].variable), clamps) * raw;
    const Eigen::MatrixXd f1 = factors[0].evaluate(column(data, factors[0].variable), clamps);
    const Eigen::MatrixXd f2 = factors[1].evaluate(column(data, factors[1].variable), clamps);
    const Eigen::MatrixXd theta_mat =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            raw.data(), f1.cols(), f2.cols());
    return ((f1 * theta_mat).array() * f2.array()).rowwise().sum();
  }

  static std::span<const double> column(const Columns& data, const std::string& name) {
    auto it = data.find(name);
    if (it == data.end()) throw Error(ErrorCode::invalid_input, "missing variable '" + name + "'");
    return as_span(it->second);
  }
};

namespace detail {

inline std::string default_label(const TermSpec& spec) {
  if (!spec.label.empty()) return spec.label;
  std::string args;
  for (std::size_t k = 0; k < spec.variables.size(); ++k) args += (k ? "," : "") + spec.variables[k];
  switch (spec.kind) {
    case TermKind::linear: return args;
    case TermKind::smooth1d: return "s(" + args + ")";
    case TermKind::smooth2d: return (spec.interaction_only ? "ti(" : "te(") + args + ")";
    case TermKind::varying: return spec.variables.at(0) + ":s(" + spec.variables.at(1) + ")";
  }
  return args;
}

inline Factor make_spline_factor(const TermSpec& spec, const std::string& variable, const Columns& data,
                                 const BuildContext& ctx) {
  const std::span<const double> v = Term::column(data, variable);
  if (v.empty()) throw Error(ErrorCode::invalid_input, "no rows to build basis for '" + variable + "'");
  double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end());
  BasisSpec bs;
  bs.dimension = spec.dimension;
  bs.degree = spec.degree;
  bs.penalty_order = spec.penalty_order;
  const bool is_time = variable == ctx.time_variable;
  if (is_time) lo = std::min(lo, ctx.time_origin);
  bs.lo = lo;
  bs.hi = hi;
  bs.knot_rule = spec.knot_rule.value_or(is_time ? KnotRule::equidistant : KnotRule::quantile);
  Factor f;
  f.variable = variable;
  f.basis = BSplineBasis(bs, v);
  return f;
}

inline Factor make_value_factor(const std::string& variable, const Columns& data) {
  Term::column(data, variable);
  Factor f;
  f.variable = variable;
  f.is_value = true;
  return f;
}

inline Eigen::VectorXd column_sums(const Factor& f, const Columns& data) {
  return f.evaluate(Term::column(data, f.variable)).colwise().sum().transpose();
}

/// Column sums of the row-wise Kronecker product of two factors, in
/// row-major (first factor slowest) order.
inline Eigen::VectorXd kron_column_sums(const Factor& a, const Factor& b, const Columns& data) {
  const Eigen::MatrixXd fa = a.evaluate(Term::column(data, a.variable));
  const Eigen::MatrixXd fb = b.evaluate(Term::column(data, b.variable));
  const Eigen::MatrixXd cross = fa.transpose() * fb;
  Eigen::VectorXd out(cross.size());
  for (Eigen::Index i = 0; i < cross.rows(); ++i)
    for (Eigen::Index j = 0; j < cross.cols(); ++j) out(i * cross.cols() + j) = cross(i, j);
  return out;
}

}  // namespace detail

/// Builds one term from its spec and the training rows: knots, constraint
/// transforms and penalties are all fixed here and reused for prediction.
inline Term build_term(const TermSpec& spec, const Columns& data, const BuildContext& ctx = {}) {
  Term term;
  term.spec = spec;
  term.label = detail::default_label(spec);
  const auto need = [&](std::size_t n) {
    if (spec.variables.size() != n)
      throw Error(ErrorCode::invalid_spec, "term '" + term.label + "' expects " + std::to_string(n) +
                                               " variable(s)");
  };
  switch (spec.kind) {
    case TermKind::linear: {
      need(1);
      term.factors.push_back(detail::make_value_factor(spec.variables[0], data));
      break;
    }
    case TermKind::smooth1d: {
      need(1);
      Factor f = detail::make_spline_factor(spec, spec.variables[0], data, ctx);
      const Eigen::MatrixXd p = f.basis.penalty();
      term.transform = sum_to_zero_transform(detail::column_sums(f, data));
      term.penalties.push_back(detail::symmetrize(term.transform.transpose() * p * term.transform));
      term.factors.push_back(std::move(f));
      break;
    }
    case TermKind::smooth2d: {
      need(2);
      if (spec.variables[0] == spec.variables[1])
        throw Error(ErrorCode::invalid_spec, "tensor term needs two distinct variables");
      Factor f1 = detail::make_spline_factor(spec, spec.variables[0], data, ctx);
      Factor f2 = detail::make_spline_factor(spec, spec.variables[1], data, ctx);
      if (f1.basis.dimension() * f2.basis.dimension() > 400)
        throw Error(ErrorCode::invalid_spec, "tensor dimension exceeds 400");
      Eigen::MatrixXd p1 = f1.basis.penalty();
      Eigen::MatrixXd p2 = f2.basis.penalty();
      if (spec.interaction_only) {
        f1.margin_constraint = sum_to_zero_transform(detail::column_sums(f1, data));
        f2.margin_constraint = sum_to_zero_transform(detail::column_sums(f2, data));
        p1 = detail::symmetrize(f1.margin_constraint.transpose() * p1 * f1.margin_constraint);
        p2 = detail::symmetrize(f2.margin_constraint.transpose() * p2 * f2.margin_constraint);
        const Eigen::Index c1 = f1.cols(), c2 = f2.cols();
        term.penalties.push_back(kronecker(p1, Eigen::MatrixXd::Identity(c2, c2)));
        term.penalties.push_back(kronecker(Eigen::MatrixXd::Identity(c1, c1), p2));
      } else {
        const Eigen::Index c1 = f1.cols(), c2 = f2.cols();
        term.transform = sum_to_zero_transform(detail::kron_column_sums(f1, f2, data));
        const Eigen::MatrixXd& z = term.transform;
        term.penalties.push_back(
            detail::symmetrize(z.transpose() * kronecker(p1, Eigen::MatrixXd::Identity(c2, c2)) * z));
        term.penalties.push_back(
            detail::symmetrize(z.transpose() * kronecker(Eigen::MatrixXd::Identity(c1, c1), p2) * z));
      }
      term.factors.push_back(std::move(f1));
      term.factors.push_back(std::move(f2));
      break;
    }
    case TermKind::varying: {
      need(2);
      Factor by = detail::make_value_factor(spec.variables[0], data);
      Factor f = detail::make_spline_factor(spec, spec.variables[1], data, ctx);
      // the smooth itself is centred, so the term never contains by * const
      f.margin_constraint = sum_to_zero_transform(detail::column_sums(f, data));
      term.penalties.push_back(
          detail::symmetrize(f.margin_constraint.transpose() * f.basis.penalty() * f.margin_constraint));
      term.factors.push_back(std::move(by));
      term.factors.push_back(std::move(f));
      break;
    }
  }
  term.null_penalty = null_space_penalty(term.penalties);
  return term;
}

/// Ordered collection of terms plus the coefficient layout.
struct ModelTerms {
  bool intercept = true;
  std::vector<Term> terms;
  std::vector<Eigen::Index> offsets;  // first coefficient of each term
  Eigen::Index n_coef = 0;

  void layout() {
    offsets.clear();
    Eigen::Index pos = intercept ? 1 : 0;
    for (const auto& t : terms) {
      offsets.push_back(pos);
      pos += t.cols();
    }
    n_coef = pos;
  }

  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    for (const auto& t : terms)
      for (const auto& f : t.factors)
        if (std::find(out.begin(), out.end(), f.variable) == out.end()) out.push_back(f.variable);
    return out;
  }

  Eigen::MatrixXd design(const Columns& data, ClampCounter* clamps = nullptr) const {
    const Eigen::Index n = rows_of(data);
    Eigen::MatrixXd x(n, n_coef);
    if (intercept) x.col(0).setOnes();
    for (std::size_t k = 0; k < terms.size(); ++k)
      x.middleCols(offsets[k], terms[k].cols()) = terms[k].design(data, clamps);
    return x;
  }

  Eigen::Index rows_of(const Columns& data) const {
    const auto vars = variables();
    if (vars.empty()) {
      if (data.empty()) throw Error(ErrorCode::invalid_input, "cannot infer row count");
      return data.begin()->second.size();
    }
    const auto it = data.find(vars.front());
    if (it == data.end()) throw Error(ErrorCode::invalid_input, "missing variable '" + vars.front() + "'");
    return it->second.size();
  }
};

inline ModelTerms build_model_terms(const ModelSpec& spec, const Columns& data, const BuildContext& ctx = {}) {
  ModelTerms m;
  m.intercept = spec.intercept;
  std::vector<std::string> labels;
  for (const auto& ts : spec.terms) {
    Term t = build_term(ts, data, ctx);
    if (std::find(labels.begin(), labels.end(), t.label) != labels.end())
      throw Error(ErrorCode::invalid_spec, "duplicate term label '" + t.label + "'");
    labels.push_back(t.label);
    m.terms.push_back(std::move(t));
  }
  m.layout();
  return m;
}

}  // namespace timeroc
